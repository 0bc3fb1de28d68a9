//! Command-line front end wiring the whole pipeline:
//! `synth -> replay -> train/estimate -> evaluate -> plot`.
//!
//! Every command is deterministic given its configuration: a run
//! configuration file (TOML) supplies defaults, command-line flags override
//! it, and a single root seed feeds every stochastic component. Exit codes:
//! 0 success, 1 usage, 2 data/configuration error, 3 numerical failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimator::{
    EstimationMetrics, PairedCorpus, TrainingConfig, cross_validate, estimate_features,
    evaluate_scaled, load_model, save_model, train,
};
use crate::evaluation::{
    DtwBackend, EvaluationReport, ForgeryMode, ProtocolConfig, UserMatrices, aggregate_runs,
    run_protocol,
};
use crate::replay::{
    FeatureSet, JointFeatureSeries, UserFeatures, WorkspacePlacement, load_feature_set, replay,
    save_feature_set,
};
use crate::robot::{KinematicChain, N_JOINTS, default_chain, load_chain_file};
use crate::signature::{
    ColumnSpec, Corpus, Label, SignatureTrajectory, UserSignatures, load_corpus,
    parse_signature_file, save_corpus,
};
use crate::synth::{SynthesisConfig, generate_corpus};
use crate::verifier::{FeatureGroup, build_feature_matrix};

pub const CHAIN_ENV: &str = "SIGKIN_CHAIN";

#[derive(Parser, Debug)]
#[command(
    name = "sigkin",
    version,
    about = "Simulated robot-arm joint features for online signature verification"
)]
struct Cli {
    /// Run configuration file (TOML); command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every stochastic component.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Chain description file; defaults to $SIGKIN_CHAIN or the bundled arm.
    #[arg(long, global = true)]
    chain: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic signature corpus.
    Synth(SynthArgs),
    /// Convert external signature files into the corpus layout.
    Ingest(IngestArgs),
    /// Replay a corpus on the simulated arm, writing feature files.
    Replay(ReplayArgs),
    /// Train the estimator on replayed features.
    Train(TrainArgs),
    /// Estimate features with a trained model, or cross-validated.
    Estimate(EstimateArgs),
    /// Run a verification protocol over feature files.
    Evaluate(EvaluateArgs),
    /// Render DET curves from CSV files into an SVG.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Corpus output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    genuine: Option<usize>,
    #[arg(long)]
    forgeries: Option<usize>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Directory of signature files named `<user>_<g|f>_<n>.<ext>`.
    #[arg(long)]
    src: PathBuf,
    /// Corpus output directory.
    #[arg(long)]
    out: PathBuf,
    /// Column layout of the source rows, e.g. "t x y p" or "x y".
    #[arg(long, default_value = "t x y")]
    cols: String,
    /// Sample rate used to synthesize timestamps when no t column exists.
    #[arg(long)]
    rate: Option<f64>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Feature output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Simulated feature directory (training targets).
    #[arg(long)]
    features: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Estimated feature output directory.
    #[arg(long)]
    out: PathBuf,
    /// Trained model file (single-model mode).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Ground-truth (simulated) features for the error table, and the
    /// training targets in --cv mode.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Cross-validated estimation with this many user folds.
    #[arg(long)]
    cv: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Feature directory (simulated or estimated).
    #[arg(long)]
    features: PathBuf,
    /// random | skilled
    #[arg(long)]
    mode: String,
    /// theta | omega | tau
    #[arg(long)]
    group: String,
    /// Report JSON to write.
    #[arg(long)]
    report: PathBuf,
    /// Averaged DET curve CSV to write.
    #[arg(long)]
    det: PathBuf,
    /// Per-comparison score dump CSV.
    #[arg(long)]
    dump_scores: Option<PathBuf>,
    #[arg(long)]
    refs: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// DET CSV files (far,frr rows) to draw.
    #[arg(long, required = true, num_args = 1..)]
    det: Vec<PathBuf>,
    /// Comma-separated legend labels; file stems by default.
    #[arg(long)]
    labels: Option<String>,
    /// SVG file to write.
    #[arg(long)]
    out: PathBuf,
}

// ---------------------------------------------------------------------------
// Run configuration file

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    chain: Option<PathBuf>,
    synthesis: Option<SynthSection>,
    placement: Option<PlacementSection>,
    training: Option<TrainingSection>,
    protocol: Option<ProtocolSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthSection {
    n_users: Option<usize>,
    genuine_per_user: Option<usize>,
    forgeries_per_user: Option<usize>,
    strokes_per_signature: Option<(usize, usize)>,
    duration: Option<(f64, f64)>,
    sample_rate: Option<f64>,
    genuine_noise: Option<f64>,
    forgery_noise: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementSection {
    surface_center: Option<[f64; 3]>,
    box_size: Option<f64>,
    pen_lift: Option<f64>,
    pen_axis: Option<[f64; 3]>,
    home_posture: Option<[f64; N_JOINTS]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainingSection {
    learning_rate: Option<f64>,
    val_fraction: Option<f64>,
    patience: Option<usize>,
    max_epochs: Option<usize>,
    batch_size: Option<usize>,
    dropout_rate: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProtocolSection {
    n_refs: Option<usize>,
    repeats: Option<usize>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

struct Context {
    file: FileConfig,
    seed: u64,
    chain_path: Option<PathBuf>,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let file = load_file_config(cli.config.as_deref())?;
        let seed = cli.seed.or(file.seed).unwrap_or(7);
        let chain_path = cli
            .chain
            .clone()
            .or_else(|| file.chain.clone())
            .or_else(|| std::env::var_os(CHAIN_ENV).map(PathBuf::from));
        Ok(Context {
            file,
            seed,
            chain_path,
        })
    }

    fn chain(&self) -> Result<KinematicChain> {
        match &self.chain_path {
            Some(p) => load_chain_file(p),
            None => Ok(default_chain()),
        }
    }

    fn synthesis(&self, args: &SynthArgs) -> SynthesisConfig {
        let mut cfg = SynthesisConfig {
            seed: self.seed,
            ..Default::default()
        };
        if let Some(s) = &self.file.synthesis {
            if let Some(v) = s.n_users {
                cfg.n_users = v;
            }
            if let Some(v) = s.genuine_per_user {
                cfg.genuine_per_user = v;
            }
            if let Some(v) = s.forgeries_per_user {
                cfg.forgeries_per_user = v;
            }
            if let Some(v) = s.strokes_per_signature {
                cfg.strokes_per_signature = v;
            }
            if let Some(v) = s.duration {
                cfg.duration = v;
            }
            if let Some(v) = s.sample_rate {
                cfg.sample_rate = v;
            }
            if let Some(v) = s.genuine_noise {
                cfg.genuine_noise = v;
            }
            if let Some(v) = s.forgery_noise {
                cfg.forgery_noise = v;
            }
        }
        if let Some(v) = args.users {
            cfg.n_users = v;
        }
        if let Some(v) = args.genuine {
            cfg.genuine_per_user = v;
        }
        if let Some(v) = args.forgeries {
            cfg.forgeries_per_user = v;
        }
        cfg
    }

    fn placement(&self) -> WorkspacePlacement {
        let mut placement = WorkspacePlacement::default();
        if let Some(p) = &self.file.placement {
            if let Some(c) = p.surface_center {
                placement.surface_center = Vector3::new(c[0], c[1], c[2]);
            }
            if let Some(v) = p.box_size {
                placement.box_size = v;
            }
            if let Some(v) = p.pen_lift {
                placement.pen_lift = v;
            }
            if let Some(a) = p.pen_axis {
                placement.pen_axis = Vector3::new(a[0], a[1], a[2]);
            }
            if let Some(h) = p.home_posture {
                placement.home_posture = h;
            }
        }
        placement
    }

    fn training(&self, epochs: Option<usize>, batch_size: Option<usize>) -> TrainingConfig {
        let mut cfg = TrainingConfig {
            seed: self.seed,
            ..Default::default()
        };
        if let Some(t) = &self.file.training {
            if let Some(v) = t.learning_rate {
                cfg.learning_rate = v;
            }
            if let Some(v) = t.val_fraction {
                cfg.val_fraction = v;
            }
            if let Some(v) = t.patience {
                cfg.patience = v;
            }
            if let Some(v) = t.max_epochs {
                cfg.max_epochs = v;
            }
            if let Some(v) = t.batch_size {
                cfg.batch_size = v;
            }
            if let Some(v) = t.dropout_rate {
                cfg.dropout_rate = v;
            }
        }
        if let Some(v) = epochs {
            cfg.max_epochs = v;
        }
        if let Some(v) = batch_size {
            cfg.batch_size = v;
        }
        cfg
    }

    fn protocol(&self, args: &EvaluateArgs, mode: ForgeryMode) -> ProtocolConfig {
        let mut cfg = ProtocolConfig {
            seed: self.seed,
            mode,
            ..Default::default()
        };
        if let Some(p) = &self.file.protocol {
            if let Some(v) = p.n_refs {
                cfg.n_refs = v;
            }
            if let Some(v) = p.repeats {
                cfg.repeats = v;
            }
        }
        if let Some(v) = args.refs {
            cfg.n_refs = v;
        }
        if let Some(v) = args.repeats {
            cfg.repeats = v;
        }
        cfg
    }
}

// ---------------------------------------------------------------------------
// Command bodies

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent()
        && !parent.as_os_str().is_empty()
    {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn cmd_synth(ctx: &Context, args: &SynthArgs) -> Result<()> {
    let cfg = ctx.synthesis(args);
    let corpus = generate_corpus(&cfg)?;
    save_corpus(&corpus, &args.out)?;
    println!(
        "synth: {} users x ({} genuine + {} forgeries) -> {}",
        cfg.n_users,
        cfg.genuine_per_user,
        cfg.forgeries_per_user,
        args.out.display()
    );
    Ok(())
}

fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let spec = ColumnSpec::parse(&args.cols, args.rate)?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(&args.src)
        .map_err(|e| Error::io(&args.src, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Validation(format!(
            "no files in {}",
            args.src.display()
        )));
    }
    let mut corpus = Corpus::default();
    for path in &files {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let (user, label) = match (stem.rsplit_once("_g_"), stem.rsplit_once("_f_")) {
            (Some((user, _)), _) => (user.to_string(), Label::Genuine),
            (_, Some((user, _))) => (user.to_string(), Label::SkilledForgery),
            _ => (stem.to_string(), Label::Genuine),
        };
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut traj = parse_signature_file(&bytes, &spec)?;
        traj.user_id = user.clone();
        traj.label = label;
        let entry = corpus
            .users
            .entry(user)
            .or_insert_with(UserSignatures::default);
        match label {
            Label::Genuine => entry.genuine.push(traj),
            Label::SkilledForgery => entry.forgeries.push(traj),
        }
    }
    save_corpus(&corpus, &args.out)?;
    println!(
        "ingest: {} files -> {} users in {}",
        files.len(),
        corpus.users.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_replay(ctx: &Context, args: &ReplayArgs) -> Result<()> {
    let chain = ctx.chain()?;
    let placement = ctx.placement();
    placement.validate(&chain)?;
    let corpus = load_corpus(&args.corpus)?;
    let mut set = FeatureSet::default();
    let mut count = 0usize;
    for (user, signatures) in &corpus.users {
        let mut features = UserFeatures::default();
        for sig in &signatures.genuine {
            features.genuine.push(replay(&chain, sig, &placement)?);
            count += 1;
        }
        for sig in &signatures.forgeries {
            features.forgeries.push(replay(&chain, sig, &placement)?);
            count += 1;
        }
        set.users.insert(user.clone(), features);
    }
    save_feature_set(&set, &args.out)?;
    println!("replay: {count} signatures -> {}", args.out.display());
    Ok(())
}

/// Pairs a corpus with its feature files one-to-one.
fn pair_corpus_features(corpus: &Corpus, features: &FeatureSet) -> Result<PairedCorpus> {
    let mut paired: PairedCorpus = BTreeMap::new();
    for (user, signatures) in &corpus.users {
        let feats = features
            .users
            .get(user)
            .ok_or_else(|| Error::Validation(format!("feature directory has no user '{user}'")))?;
        for (kind, sigs, series) in [
            ("genuine", &signatures.genuine, &feats.genuine),
            ("forgeries", &signatures.forgeries, &feats.forgeries),
        ] {
            if sigs.len() != series.len() {
                return Err(Error::Shape {
                    what: format!("{user} {kind}"),
                    expected: format!("{} feature files", sigs.len()),
                    got: format!("{}", series.len()),
                });
            }
            for (s, f) in sigs.iter().zip(series.iter()) {
                if s.samples.len() != f.len() {
                    return Err(Error::Shape {
                        what: format!("{user} {kind} alignment"),
                        expected: format!("{} rows", s.samples.len()),
                        got: format!("{}", f.len()),
                    });
                }
            }
        }
        paired.insert(
            user.clone(),
            (
                signatures
                    .genuine
                    .iter()
                    .cloned()
                    .zip(feats.genuine.iter().cloned())
                    .collect(),
                signatures
                    .forgeries
                    .iter()
                    .cloned()
                    .zip(feats.forgeries.iter().cloned())
                    .collect(),
            ),
        );
    }
    Ok(paired)
}

fn flatten(paired: &PairedCorpus) -> Vec<(SignatureTrajectory, JointFeatureSeries)> {
    let mut items = Vec::new();
    for (genuine, forgeries) in paired.values() {
        items.extend(genuine.iter().cloned());
        items.extend(forgeries.iter().cloned());
    }
    items
}

fn print_metrics_table(metrics: &EstimationMetrics) {
    println!("parameter  MAE      MSE");
    for (h, name) in ["theta", "omega", "tau"].iter().enumerate() {
        println!("{name:<9}  {:.4}   {:.4}", metrics.mae[h], metrics.mse[h]);
    }
}

fn cmd_train(ctx: &Context, args: &TrainArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let features = load_feature_set(&args.features)?;
    let paired = pair_corpus_features(&corpus, &features)?;
    let items = flatten(&paired);
    let cfg = ctx.training(args.epochs, args.batch_size);
    let outcome = train(&items, &cfg)?;
    for e in &outcome.history {
        println!(
            "epoch {:>3}: train {:.6}  val {:.6} (theta {:.6} omega {:.6} tau {:.6})",
            e.epoch, e.train_loss, e.val_loss, e.val_theta, e.val_omega, e.val_tau
        );
    }
    println!("best epoch: {}", outcome.best_epoch);
    write_bytes(&args.out, &save_model(&outcome.model)?)?;
    println!("train: model -> {}", args.out.display());
    Ok(())
}

fn cmd_estimate(ctx: &Context, args: &EstimateArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    match (&args.model, args.cv) {
        (Some(_), Some(_)) => Err(Error::Config(
            "--model and --cv are mutually exclusive".into(),
        )),
        (None, None) => Err(Error::Config("estimate needs --model or --cv".into())),
        (Some(model_path), None) => {
            let bytes = std::fs::read(model_path).map_err(|e| Error::io(model_path, e))?;
            let model = load_model(&bytes)?;
            let mut out = FeatureSet::default();
            for (user, signatures) in &corpus.users {
                let mut features = UserFeatures::default();
                for sig in &signatures.genuine {
                    features.genuine.push(estimate_features(&model, sig)?);
                }
                for sig in &signatures.forgeries {
                    features.forgeries.push(estimate_features(&model, sig)?);
                }
                out.users.insert(user.clone(), features);
            }
            save_feature_set(&out, &args.out)?;
            println!(
                "estimate: {} users -> {}",
                out.users.len(),
                args.out.display()
            );
            if let Some(truth_dir) = &args.truth {
                let truth = load_feature_set(truth_dir)?;
                let paired = pair_corpus_features(&corpus, &truth)?;
                let metrics = evaluate_scaled(&model, &flatten(&paired))?;
                print_metrics_table(&metrics);
            }
            Ok(())
        }
        (None, Some(k)) => {
            let truth_dir = args.truth.as_ref().ok_or_else(|| {
                Error::Config("--cv needs --truth (simulated features as targets)".into())
            })?;
            let truth = load_feature_set(truth_dir)?;
            let paired = pair_corpus_features(&corpus, &truth)?;
            let cfg = ctx.training(args.epochs, args.batch_size);
            let outcome = cross_validate(&paired, &cfg, k)?;
            save_feature_set(&outcome.estimated, &args.out)?;
            println!(
                "estimate: {k}-fold cross-validated, {} users -> {}",
                outcome.estimated.users.len(),
                args.out.display()
            );
            for (fold, m) in outcome.fold_metrics.iter().enumerate() {
                println!(
                    "fold {fold}: MAE theta {:.4} omega {:.4} tau {:.4}",
                    m.mae[0], m.mae[1], m.mae[2]
                );
            }
            println!("mean over folds:");
            print_metrics_table(&outcome.mean_metrics);
            Ok(())
        }
    }
}

fn series_matrices(
    list: &[JointFeatureSeries],
    group: FeatureGroup,
) -> Result<Vec<crate::verifier::FeatureMatrix>> {
    list.iter()
        .map(|s| build_feature_matrix(s, group))
        .collect()
}

fn cmd_evaluate(ctx: &Context, args: &EvaluateArgs) -> Result<()> {
    let group = FeatureGroup::parse(&args.group)
        .ok_or_else(|| Error::Config(format!("unknown feature group '{}'", args.group)))?;
    let mode = ForgeryMode::parse(&args.mode)
        .ok_or_else(|| Error::Config(format!("unknown mode '{}'", args.mode)))?;
    let set = load_feature_set(&args.features)?;
    if set.users.is_empty() {
        return Err(Error::Validation(format!(
            "no feature files in {}",
            args.features.display()
        )));
    }

    let mut sources: Vec<&'static str> = Vec::new();
    let mut users: BTreeMap<String, UserMatrices> = BTreeMap::new();
    for (user, features) in &set.users {
        for s in features.genuine.iter().chain(&features.forgeries) {
            if !sources.contains(&s.source.as_str()) {
                sources.push(s.source.as_str());
            }
        }
        users.insert(
            user.clone(),
            UserMatrices {
                genuine: series_matrices(&features.genuine, group)?,
                forgeries: series_matrices(&features.forgeries, group)?,
            },
        );
    }
    if sources.len() != 1 {
        return Err(Error::Validation(format!(
            "feature directory mixes sources {sources:?}; evaluate one at a time"
        )));
    }

    let cfg = ctx.protocol(args, mode);
    let runs = run_protocol(&users, &DtwBackend, &cfg)?;
    let agg = aggregate_runs(&runs)?;
    let (per_run_eer, eer_mean, eer_std, det) =
        (agg.per_run_eer, agg.eer_mean, agg.eer_std, agg.det);

    let report = EvaluationReport {
        mode: mode.as_str().to_string(),
        feature_group: group.as_str().to_string(),
        feature_source: sources[0].to_string(),
        seed: cfg.seed,
        n_refs: cfg.n_refs,
        per_run_eer: per_run_eer.clone(),
        run_seeds: runs.iter().map(|r| r.run_seed).collect(),
        eer_mean,
        eer_std,
        det: det.clone(),
    };
    let mut json = serde_json::to_vec_pretty(&report)
        .map_err(|e| Error::Validation(format!("serialize report: {e}")))?;
    json.push(b'\n');
    write_bytes(&args.report, &json)?;

    let mut csv = String::from("far,frr\n");
    for (far, frr) in &det {
        csv.push_str(&format!("{far},{frr}\n"));
    }
    write_bytes(&args.det, csv.as_bytes())?;

    if let Some(path) = &args.dump_scores {
        let mut dump =
            String::from("run,target_user,questioned,kind,s_r,path_len,s_hat_1,s_hat_2\n");
        for run in &runs {
            for r in &run.records {
                dump.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.run,
                    r.target_user,
                    r.questioned,
                    r.kind,
                    r.s_r,
                    r.path_len,
                    r.s_hat_1,
                    r.s_hat_2
                ));
            }
        }
        write_bytes(path, dump.as_bytes())?;
    }

    println!(
        "evaluate: {} {} {} -> EER {:.4} +- {:.4} over {} runs",
        sources[0],
        group.as_str(),
        mode.as_str(),
        eer_mean,
        eer_std,
        per_run_eer.len()
    );
    Ok(())
}

fn cmd_plot(args: &PlotArgs) -> Result<()> {
    let labels: Vec<String> = match &args.labels {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => args
            .det
            .iter()
            .map(|p| {
                p.file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("curve")
                    .to_string()
            })
            .collect(),
    };
    if labels.len() != args.det.len() {
        return Err(Error::Config(format!(
            "{} labels for {} curves",
            labels.len(),
            args.det.len()
        )));
    }
    let mut curves = Vec::new();
    for (path, label) in args.det.iter().zip(labels) {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut points = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("far") || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split(',');
            let (Some(far), Some(frr)) = (fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: "expected far,frr".into(),
                });
            };
            let far: f64 = far.trim().parse().map_err(|_| Error::Parse {
                line: idx + 1,
                msg: format!("bad far '{far}'"),
            })?;
            let frr: f64 = frr.trim().parse().map_err(|_| Error::Parse {
                line: idx + 1,
                msg: format!("bad frr '{frr}'"),
            })?;
            points.push((far, frr));
        }
        if points.is_empty() {
            return Err(Error::Validation(format!(
                "{}: no DET points",
                path.display()
            )));
        }
        curves.push((label, points));
    }
    write_bytes(&args.out, crate::plot::det_svg(&curves).as_bytes())?;
    println!("plot: {} curves -> {}", curves.len(), args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// Entry point

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Unreachable { .. }
        | Error::Planning { .. }
        | Error::Training { .. }
        | Error::DegenerateReferences => 3,
        _ => 2,
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let ctx = Context::new(cli)?;
    match &cli.command {
        Command::Synth(args) => cmd_synth(&ctx, args),
        Command::Ingest(args) => cmd_ingest(args),
        Command::Replay(args) => cmd_replay(&ctx, args),
        Command::Train(args) => cmd_train(&ctx, args),
        Command::Estimate(args) => cmd_estimate(&ctx, args),
        Command::Evaluate(args) => cmd_evaluate(&ctx, args),
        Command::Plot(args) => cmd_plot(args),
    }
}

/// Runs the CLI on explicit arguments (argv\[0\] included) and returns the
/// process exit code. Diagnostics go to stderr as a single line.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let msg = e.render().to_string();
            eprintln!("sigkin: {}", msg.lines().next().unwrap_or("bad usage"));
            return 1;
        }
        Err(e) => {
            // --help / --version output.
            print!("{e}");
            return 0;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("sigkin: {err}");
            exit_code_for(&err)
        }
    }
}
