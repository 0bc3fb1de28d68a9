//! Verification experiments: reference/test protocols for random and
//! skilled forgeries, EER and DET computation, and multi-run aggregation.
//!
//! Score polarity is fixed throughout: lower means more genuine.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::verifier::{FeatureMatrix, RefStats, VerificationScore, score_questioned};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForgeryMode {
    RandomForgery,
    SkilledForgery,
}

impl ForgeryMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ForgeryMode::RandomForgery => "random",
            ForgeryMode::SkilledForgery => "skilled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(ForgeryMode::RandomForgery),
            "skilled" => Some(ForgeryMode::SkilledForgery),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub n_refs: usize,
    pub repeats: usize,
    pub seed: u64,
    pub mode: ForgeryMode,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_refs: 5,
            repeats: 10,
            seed: 7,
            mode: ForgeryMode::RandomForgery,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_refs < 2 {
            return Err(Error::Config(
                "n_refs must be >= 2 (mu_R needs pairs)".into(),
            ));
        }
        if self.repeats < 1 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        Ok(())
    }
}

/// Feature matrices of one user's signatures.
#[derive(Debug, Clone, Default)]
pub struct UserMatrices {
    pub genuine: Vec<FeatureMatrix>,
    pub forgeries: Vec<FeatureMatrix>,
}

/// Scoring backend: how a questioned matrix is compared against a reference
/// set. The DTW verifier is the production implementation; the indirection
/// keeps protocol logic testable with synthetic scores.
pub trait ScoreBackend {
    fn reference_stats(&self, refs: &[FeatureMatrix]) -> Result<RefStats>;
    fn score(
        &self,
        questioned: &FeatureMatrix,
        refs: &[FeatureMatrix],
        stats: &RefStats,
    ) -> Result<VerificationScore>;
}

/// Band-constrained DTW scoring (the default backend).
#[derive(Debug, Clone, Copy, Default)]
pub struct DtwBackend;

impl ScoreBackend for DtwBackend {
    fn reference_stats(&self, refs: &[FeatureMatrix]) -> Result<RefStats> {
        RefStats::compute(refs)
    }

    fn score(
        &self,
        questioned: &FeatureMatrix,
        refs: &[FeatureMatrix],
        stats: &RefStats,
    ) -> Result<VerificationScore> {
        score_questioned(questioned, refs, stats)
    }
}

/// One scored comparison, kept for audit dumps.
#[derive(Debug, Clone)]
pub struct ScoreRecord {
    pub run: usize,
    /// User whose reference set was used.
    pub target_user: String,
    /// Questioned signature, e.g. "u003/g_07".
    pub questioned: String,
    /// "genuine" or "impostor".
    pub kind: &'static str,
    pub s_r: f64,
    pub path_len: usize,
    pub s_hat_1: f64,
    pub s_hat_2: f64,
}

/// Scores from one protocol run.
#[derive(Debug, Clone, Default)]
pub struct RunScores {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
    pub records: Vec<ScoreRecord>,
    /// Stream identifier of the run's draws, recorded for audit.
    pub run_seed: u64,
}

/// Runs the reference/test protocol `config.repeats` times.
///
/// Per user and per run: `n_refs` seeded genuine references; the remaining
/// genuine signatures score as genuine test samples. Impostor samples are
/// one randomly drawn genuine signature from every other user (random mode)
/// or all of the user's skilled forgeries (skilled mode). Forgeries never
/// enter the reference set. The decision score is stage 1 (path-normalized)
/// for random forgeries and stage 2 (mu_R-normalized) for skilled ones.
pub fn run_protocol(
    users: &BTreeMap<String, UserMatrices>,
    backend: &impl ScoreBackend,
    config: &ProtocolConfig,
) -> Result<Vec<RunScores>> {
    config.validate()?;
    if users.len() < 2 {
        return Err(Error::Protocol("protocol needs >= 2 users".into()));
    }
    for (user, set) in users {
        if set.genuine.len() <= config.n_refs {
            return Err(Error::Protocol(format!(
                "user {user} has {} genuine signatures, needs more than n_refs = {}",
                set.genuine.len(),
                config.n_refs
            )));
        }
        if config.mode == ForgeryMode::SkilledForgery && set.forgeries.is_empty() {
            return Err(Error::Protocol(format!(
                "user {user} has no skilled forgeries for skilled mode"
            )));
        }
    }

    let root = Rng::new(config.seed);
    let pick = |score: &VerificationScore| match config.mode {
        ForgeryMode::RandomForgery => score.s_hat_1,
        ForgeryMode::SkilledForgery => score.s_hat_2,
    };

    let mut runs = Vec::with_capacity(config.repeats);
    for run in 0..config.repeats {
        let mut scores = RunScores {
            run_seed: root.derive("run-id", run as u64).next_u64(),
            ..RunScores::default()
        };
        for (u_idx, (user, set)) in users.iter().enumerate() {
            let mut rng = root.derive(&format!("run{run}/user"), u_idx as u64);
            let mut order: Vec<usize> = (0..set.genuine.len()).collect();
            rng.shuffle(&mut order);
            let (ref_idx, test_idx) = order.split_at(config.n_refs);
            let refs: Vec<FeatureMatrix> =
                ref_idx.iter().map(|&i| set.genuine[i].clone()).collect();
            let stats = backend.reference_stats(&refs)?;

            let mut record = |questioned: String, kind: &'static str, s: &VerificationScore| {
                scores.records.push(ScoreRecord {
                    run,
                    target_user: user.clone(),
                    questioned,
                    kind,
                    s_r: s.s_r,
                    path_len: s.path_len,
                    s_hat_1: s.s_hat_1,
                    s_hat_2: s.s_hat_2,
                });
            };

            for &i in test_idx {
                let s = backend.score(&set.genuine[i], &refs, &stats)?;
                record(format!("{user}/g_{:02}", i + 1), "genuine", &s);
                scores.genuine.push(pick(&s));
            }

            match config.mode {
                ForgeryMode::RandomForgery => {
                    for (other, other_set) in users {
                        if other == user {
                            continue;
                        }
                        let j = rng.below(other_set.genuine.len());
                        let s = backend.score(&other_set.genuine[j], &refs, &stats)?;
                        record(format!("{other}/g_{:02}", j + 1), "impostor", &s);
                        scores.impostor.push(pick(&s));
                    }
                }
                ForgeryMode::SkilledForgery => {
                    for (f, forgery) in set.forgeries.iter().enumerate() {
                        let s = backend.score(forgery, &refs, &stats)?;
                        record(format!("{user}/f_{:02}", f + 1), "impostor", &s);
                        scores.impostor.push(pick(&s));
                    }
                }
            }
        }
        runs.push(scores);
    }
    Ok(runs)
}

/// Operating points (threshold, FAR, FRR) at every distinct threshold, with
/// sentinel points below and above all scores. FAR(t) is the fraction of
/// impostor scores <= t; FRR(t) the fraction of genuine scores > t.
fn operating_points(genuine: &[f64], impostor: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::Protocol("score lists must be non-empty".into()));
    }
    if genuine.iter().chain(impostor).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite score".into()));
    }
    let mut thresholds: Vec<f64> = genuine.iter().chain(impostor).cloned().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();

    let far = |t: f64| impostor.iter().filter(|&&s| s <= t).count() as f64 / impostor.len() as f64;
    let frr = |t: f64| genuine.iter().filter(|&&s| s > t).count() as f64 / genuine.len() as f64;

    let mut points = Vec::with_capacity(thresholds.len() + 2);
    let low = thresholds[0] - 1.0;
    points.push((low, 0.0, 1.0));
    for t in thresholds {
        points.push((t, far(t), frr(t)));
    }
    Ok(points)
}

/// Equal error rate: the FAR/FRR crossing over the threshold sweep, linearly
/// interpolated between adjacent operating points when no threshold hits the
/// crossing exactly.
pub fn compute_eer(genuine: &[f64], impostor: &[f64]) -> Result<f64> {
    let points = operating_points(genuine, impostor)?;
    let mut prev = points[0];
    for &p in &points {
        let d = p.1 - p.2;
        if d == 0.0 {
            return Ok(p.1);
        }
        if d > 0.0 {
            // Crossing sits between prev (d < 0) and p (d > 0).
            let d_prev = prev.1 - prev.2;
            let alpha = -d_prev / (d - d_prev);
            return Ok(prev.1 + alpha * (p.1 - prev.1));
        }
        prev = p;
    }
    // FAR never reaches FRR inside the sweep; the final point has FAR = 1,
    // FRR = 0, so this is unreachable for non-empty lists.
    unreachable!("FAR/FRR crossing must exist");
}

/// DET curve: one (FAR, FRR) point per distinct threshold, sorted by FAR,
/// with the endpoints (0, 1) and (1, 0) included. Thresholds sharing a FAR
/// produce vertical steps; exact duplicates collapse.
pub fn det_curve(genuine: &[f64], impostor: &[f64]) -> Result<Vec<(f64, f64)>> {
    let points = operating_points(genuine, impostor)?;
    let mut curve: Vec<(f64, f64)> = Vec::new();
    for (_, far, frr) in points {
        if curve.last() != Some(&(far, frr)) {
            curve.push((far, frr));
        }
    }
    if curve.last().map(|&(f, _)| f) != Some(1.0) {
        curve.push((1.0, 0.0));
    }
    Ok(curve)
}

/// FRR of a DET curve at an arbitrary FAR by piecewise-linear interpolation.
pub fn det_interpolate(curve: &[(f64, f64)], far: f64) -> f64 {
    if curve.is_empty() {
        return f64::NAN;
    }
    if far <= curve[0].0 {
        return curve[0].1;
    }
    for w in curve.windows(2) {
        let (f0, r0) = w[0];
        let (f1, r1) = w[1];
        if far <= f1 {
            if f1 == f0 {
                return r1;
            }
            return r0 + (r1 - r0) * (far - f0) / (f1 - f0);
        }
    }
    curve.last().unwrap().1
}

pub const DET_GRID_POINTS: usize = 50;
pub const DET_GRID_MIN: f64 = 1e-3;

/// Geometric FAR grid used for DET averaging.
pub fn det_far_grid() -> Vec<f64> {
    let n = DET_GRID_POINTS;
    (0..n)
        .map(|i| DET_GRID_MIN * (1.0 / DET_GRID_MIN).powf(i as f64 / (n - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mode: String,
    pub feature_group: String,
    pub feature_source: String,
    pub seed: u64,
    pub n_refs: usize,
    pub per_run_eer: Vec<f64>,
    pub run_seeds: Vec<u64>,
    pub eer_mean: f64,
    /// Sample standard deviation (n-1); zero for a single run.
    pub eer_std: f64,
    /// Averaged DET sampled on the geometric FAR grid.
    pub det: Vec<(f64, f64)>,
}

/// Aggregate of a protocol's runs.
#[derive(Debug, Clone)]
pub struct RunAggregate {
    pub per_run_eer: Vec<f64>,
    pub eer_mean: f64,
    /// Sample standard deviation (n-1); zero for a single run.
    pub eer_std: f64,
    /// Pointwise mean of the per-run DET curves on the geometric FAR grid.
    pub det: Vec<(f64, f64)>,
}

/// Aggregates runs: per-run EERs, mean and sample standard deviation, and
/// the pointwise mean of the per-run DET curves on a common FAR grid.
pub fn aggregate_runs(runs: &[RunScores]) -> Result<RunAggregate> {
    if runs.is_empty() {
        return Err(Error::Protocol("no runs to aggregate".into()));
    }
    let mut eers = Vec::with_capacity(runs.len());
    let mut curves = Vec::with_capacity(runs.len());
    for run in runs {
        eers.push(compute_eer(&run.genuine, &run.impostor)?);
        curves.push(det_curve(&run.genuine, &run.impostor)?);
    }
    let mean = eers.iter().sum::<f64>() / eers.len() as f64;
    let std = if eers.len() > 1 {
        (eers.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (eers.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let det: Vec<(f64, f64)> = det_far_grid()
        .into_iter()
        .map(|far| {
            let frr =
                curves.iter().map(|c| det_interpolate(c, far)).sum::<f64>() / curves.len() as f64;
            (far, frr)
        })
        .collect();
    Ok(RunAggregate {
        per_run_eer: eers,
        eer_mean: mean,
        eer_std: std,
        det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::verifier::FeatureGroup;

    /// Exhaustive oracle: walk every adjacent threshold pair of the merged
    /// score set and locate the crossing of the interpolated FAR/FRR lines.
    /// Written independently of compute_eer.
    fn eer_oracle(genuine: &[f64], impostor: &[f64]) -> f64 {
        let mut ts: Vec<f64> = genuine.iter().chain(impostor).cloned().collect();
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup();
        ts.insert(0, ts[0] - 1.0);
        let far =
            |t: f64| impostor.iter().filter(|&&s| s <= t).count() as f64 / impostor.len() as f64;
        let frr = |t: f64| genuine.iter().filter(|&&s| s > t).count() as f64 / genuine.len() as f64;
        for w in ts.windows(2) {
            let (f0, r0) = (far(w[0]), frr(w[0]));
            let (f1, r1) = (far(w[1]), frr(w[1]));
            if f0 - r0 == 0.0 {
                return f0;
            }
            if (f0 - r0) < 0.0 && (f1 - r1) >= 0.0 {
                let d0 = f0 - r0;
                let d1 = f1 - r1;
                let a = -d0 / (d1 - d0);
                return f0 + a * (f1 - f0);
            }
        }
        1.0
    }

    #[test]
    fn perfectly_separated_lists_have_zero_eer() {
        let eer = compute_eer(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0]).unwrap();
        assert_eq!(eer, 0.0);
    }

    #[test]
    fn identical_distributions_have_half_eer() {
        let scores = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let eer = compute_eer(&scores, &scores).unwrap();
        assert!((eer - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hand_case_gives_one_third() {
        let eer = compute_eer(&[1.0, 2.0, 3.0], &[2.5, 3.5, 4.5]).unwrap();
        assert!((eer - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_lists_error() {
        assert!(compute_eer(&[], &[1.0]).is_err());
        assert!(compute_eer(&[1.0], &[]).is_err());
        assert!(det_curve(&[], &[1.0]).is_err());
    }

    #[test]
    fn eer_matches_exhaustive_oracle_on_short_lists() {
        let mut rng = Rng::new(5);
        for _ in 0..500 {
            let ng = rng.range_usize(1, 20);
            let ni = rng.range_usize(1, 20);
            let genuine: Vec<f64> = (0..ng).map(|_| rng.uniform(0.0, 10.0)).collect();
            let impostor: Vec<f64> = (0..ni).map(|_| rng.uniform(2.0, 12.0)).collect();
            let got = compute_eer(&genuine, &impostor).unwrap();
            let want = eer_oracle(&genuine, &impostor);
            assert!(
                (got - want).abs() <= 1e-9,
                "eer {got} vs oracle {want} on g={genuine:?} i={impostor:?}"
            );
        }
    }

    #[test]
    fn det_curve_is_monotone_and_anchored() {
        let mut rng = Rng::new(6);
        for _ in 0..100 {
            let genuine: Vec<f64> = (0..15).map(|_| rng.uniform(0.0, 5.0)).collect();
            let impostor: Vec<f64> = (0..15).map(|_| rng.uniform(2.0, 8.0)).collect();
            let curve = det_curve(&genuine, &impostor).unwrap();
            assert_eq!(curve.first().unwrap(), &(0.0, 1.0));
            assert_eq!(curve.last().unwrap(), &(1.0, 0.0));
            for w in curve.windows(2) {
                assert!(w[1].0 >= w[0].0, "FAR must not decrease");
                assert!(w[1].1 <= w[0].1, "FRR must not increase");
            }
        }
    }

    #[test]
    fn eer_lies_on_the_det_polyline() {
        // The point (eer, eer) must sit on the piecewise-linear DET curve;
        // the crossing may fall inside a vertical step, so this is a
        // point-to-segment check rather than single-valued interpolation.
        let on_curve = |curve: &[(f64, f64)], p: (f64, f64)| -> bool {
            curve.windows(2).any(|w| {
                let (ax, ay) = w[0];
                let (bx, by) = w[1];
                let (dx, dy) = (bx - ax, by - ay);
                let len2 = dx * dx + dy * dy;
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    (((p.0 - ax) * dx + (p.1 - ay) * dy) / len2).clamp(0.0, 1.0)
                };
                let (cx, cy) = (ax + t * dx, ay + t * dy);
                ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt() <= 1e-9
            })
        };
        let mut rng = Rng::new(7);
        for _ in 0..100 {
            let genuine: Vec<f64> = (0..12).map(|_| rng.uniform(0.0, 5.0)).collect();
            let impostor: Vec<f64> = (0..12).map(|_| rng.uniform(1.0, 7.0)).collect();
            let eer = compute_eer(&genuine, &impostor).unwrap();
            let curve = det_curve(&genuine, &impostor).unwrap();
            assert!(
                on_curve(&curve, (eer, eer)),
                "({eer}, {eer}) not on {curve:?}"
            );
        }
    }

    #[test]
    fn aggregation_means_and_deviations() {
        let runs = vec![
            RunScores {
                genuine: vec![1.0, 2.0, 3.0],
                impostor: vec![10.0, 11.0, 12.0],
                records: Vec::new(),
                run_seed: 0,
            },
            RunScores {
                genuine: vec![1.0, 2.0, 3.0],
                impostor: vec![2.5, 3.5, 4.5],
                records: Vec::new(),
                run_seed: 0,
            },
        ];
        let agg = aggregate_runs(&runs).unwrap();
        let (eers, mean, std, det) = (agg.per_run_eer, agg.eer_mean, agg.eer_std, agg.det);
        assert_eq!(eers[0], 0.0);
        assert!((eers[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((mean - 1.0 / 6.0).abs() < 1e-12);
        // Sample std of [0, 1/3].
        let want_std = ((0.0f64 - 1.0 / 6.0).powi(2) + (1.0f64 / 3.0 - 1.0 / 6.0).powi(2)).sqrt();
        assert!((std - want_std).abs() < 1e-12);
        assert_eq!(det.len(), DET_GRID_POINTS);
    }

    #[test]
    fn identical_runs_have_zero_std_and_their_own_det() {
        let run = RunScores {
            genuine: vec![1.0, 2.0],
            impostor: vec![1.5, 3.0],
            records: Vec::new(),
            run_seed: 0,
        };
        let runs = vec![run.clone(), run.clone(), run.clone()];
        let agg = aggregate_runs(&runs).unwrap();
        let (std, det) = (agg.eer_std, agg.det);
        assert_eq!(std, 0.0);
        let single = det_curve(&run.genuine, &run.impostor).unwrap();
        for (far, frr) in det {
            assert!((frr - det_interpolate(&single, far)).abs() < 1e-12);
        }
    }

    #[test]
    fn averaged_det_lies_between_run_extremes() {
        let runs = vec![
            RunScores {
                genuine: vec![1.0, 2.0, 3.0],
                impostor: vec![2.0, 4.0, 5.0],
                records: Vec::new(),
                run_seed: 0,
            },
            RunScores {
                genuine: vec![0.5, 1.5, 2.5],
                impostor: vec![3.0, 3.5, 6.0],
                records: Vec::new(),
                run_seed: 0,
            },
        ];
        let det = aggregate_runs(&runs).unwrap().det;
        let curves: Vec<_> = runs
            .iter()
            .map(|r| det_curve(&r.genuine, &r.impostor).unwrap())
            .collect();
        for (far, frr) in det {
            let values: Vec<f64> = curves.iter().map(|c| det_interpolate(c, far)).collect();
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(frr >= lo - 1e-12 && frr <= hi + 1e-12);
        }
    }

    // Protocol tests use a synthetic backend: the "distance" between two
    // matrices is the absolute difference of their first cells, which makes
    // expected counts and determinism easy to assert.
    struct ToyBackend;

    impl ScoreBackend for ToyBackend {
        fn reference_stats(&self, refs: &[FeatureMatrix]) -> Result<RefStats> {
            let _ = refs;
            Ok(RefStats { mu_r: 1.0 })
        }

        fn score(
            &self,
            questioned: &FeatureMatrix,
            refs: &[FeatureMatrix],
            _stats: &RefStats,
        ) -> Result<VerificationScore> {
            let q = questioned.row(0)[0];
            let s_r = refs
                .iter()
                .map(|r| (r.row(0)[0] - q).abs())
                .fold(f64::INFINITY, f64::min);
            Ok(VerificationScore {
                s_r,
                path_len: 1,
                s_hat_1: s_r,
                s_hat_2: s_r,
                mu_r: 1.0,
            })
        }
    }

    fn toy_matrix(v: f64) -> FeatureMatrix {
        FeatureMatrix::from_rows(vec![vec![v, 0.0]], FeatureGroup::Theta).unwrap()
    }

    fn toy_users(
        n_users: usize,
        genuine: usize,
        forgeries: usize,
    ) -> BTreeMap<String, UserMatrices> {
        let mut users = BTreeMap::new();
        for u in 0..n_users {
            let base = u as f64 * 10.0;
            users.insert(
                format!("u{:03}", u + 1),
                UserMatrices {
                    genuine: (0..genuine)
                        .map(|g| toy_matrix(base + g as f64 * 0.1))
                        .collect(),
                    forgeries: (0..forgeries)
                        .map(|f| toy_matrix(base + 1.0 + f as f64))
                        .collect(),
                },
            );
        }
        users
    }

    #[test]
    fn protocol_counts_match_the_design() {
        let users = toy_users(6, 10, 4);
        let cfg = ProtocolConfig {
            repeats: 3,
            ..Default::default()
        };
        let runs = run_protocol(&users, &ToyBackend, &cfg).unwrap();
        assert_eq!(runs.len(), 3);
        for run in &runs {
            // 5 genuine tests per user (10 - 5 refs) and 5 impostors per
            // user (one from each of the other 5 users).
            assert_eq!(run.genuine.len(), 6 * 5);
            assert_eq!(run.impostor.len(), 6 * 5);
        }

        let skilled = ProtocolConfig {
            mode: ForgeryMode::SkilledForgery,
            repeats: 2,
            ..Default::default()
        };
        let runs = run_protocol(&users, &ToyBackend, &skilled).unwrap();
        for run in &runs {
            assert_eq!(run.impostor.len(), 6 * 4, "all forgeries used");
        }
    }

    #[test]
    fn protocol_is_deterministic_and_seed_sensitive() {
        let users = toy_users(4, 8, 2);
        let cfg = ProtocolConfig {
            repeats: 2,
            seed: 11,
            ..Default::default()
        };
        let a = run_protocol(&users, &ToyBackend, &cfg).unwrap();
        let b = run_protocol(&users, &ToyBackend, &cfg).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.genuine, rb.genuine);
            assert_eq!(ra.impostor, rb.impostor);
        }
        let other = run_protocol(
            &users,
            &ToyBackend,
            &ProtocolConfig {
                seed: 12,
                repeats: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(a[0].genuine != other[0].genuine || a[0].impostor != other[0].impostor);
    }

    #[test]
    fn too_few_genuine_signatures_name_the_user() {
        let users = toy_users(3, 5, 2); // needs > 5
        match run_protocol(&users, &ToyBackend, &ProtocolConfig::default()) {
            Err(Error::Protocol(msg)) => assert!(msg.contains("u001")),
            other => panic!("expected protocol error, got {other:?}"),
        }
    }

    #[test]
    fn skilled_mode_requires_forgeries() {
        let users = toy_users(3, 8, 0);
        let cfg = ProtocolConfig {
            mode: ForgeryMode::SkilledForgery,
            ..Default::default()
        };
        assert!(matches!(
            run_protocol(&users, &ToyBackend, &cfg),
            Err(Error::Protocol(_))
        ));
    }
}
