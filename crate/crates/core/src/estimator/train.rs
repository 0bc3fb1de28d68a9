//! Training: backprop through the three heads, Adam updates, validation
//! early stopping, and user-level cross-validation.

// Index loops mirror the weight-matrix layout on purpose.
#![allow(clippy::needless_range_loop)]
use std::collections::BTreeMap;

use super::{
    EstimationMetrics, HEAD_DIM, HIDDEN_DIM, INPUT_DIM, MLPModel, N_HEADS, TARGET_DIM,
    build_windows, composite_loss, estimate_features, evaluate_scaled, fit_scalers, forward_trace,
    target_vector,
};
use crate::error::{Error, Result};
use crate::replay::{FeatureSet, JointFeatureSeries, UserFeatures};
use crate::rng::Rng;
use crate::signature::SignatureTrajectory;

#[derive(Debug, Clone)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub val_fraction: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.01,
            val_fraction: 0.2,
            patience: 1,
            max_epochs: 50,
            batch_size: 256,
            dropout_rate: 0.3,
            seed: 7,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config("val_fraction must be in (0, 1)".into()));
        }
        if self.patience < 1 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if self.max_epochs < 1 || self.batch_size < 1 {
            return Err(Error::Config(
                "max_epochs and batch_size must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config("dropout_rate must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_theta: f64,
    pub val_omega: f64,
    pub val_tau: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MLPModel,
    pub history: Vec<EpochStats>,
    /// Epoch whose snapshot is returned (best validation loss).
    pub best_epoch: usize,
}

/// Parameter gradients mirroring the model layout.
#[derive(Debug, Clone)]
pub struct Grads {
    pub w_hidden: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub w_heads: [Vec<f64>; N_HEADS],
    pub b_heads: [Vec<f64>; N_HEADS],
}

impl Grads {
    pub(super) fn zeroed() -> Self {
        Grads {
            w_hidden: vec![0.0; HIDDEN_DIM * INPUT_DIM],
            b_hidden: vec![0.0; HIDDEN_DIM],
            w_heads: std::array::from_fn(|_| vec![0.0; HEAD_DIM * HIDDEN_DIM]),
            b_heads: std::array::from_fn(|_| vec![0.0; HEAD_DIM]),
        }
    }
}

/// Accumulates dL/dparams for one sample into `grads`. The loss is the
/// composite MSE normalized by (batch_size * HEAD_DIM) per head, matching
/// [`composite_loss`] over the batch.
fn accumulate_gradients(
    model: &MLPModel,
    window: &[f64; INPUT_DIM],
    target: &[f64; TARGET_DIM],
    batch_size: usize,
    dropout_rng: Option<&mut Rng>,
    grads: &mut Grads,
) -> [f64; TARGET_DIM] {
    let trace = forward_trace(model, window, dropout_rng);
    let norm = (batch_size * HEAD_DIM) as f64;

    // Output layer: dL/dz = 2 (y - t) / norm * y (1 - y).
    let mut delta_hidden = [0.0; HIDDEN_DIM];
    for head in 0..N_HEADS {
        for k in 0..HEAD_DIM {
            let idx = head * HEAD_DIM + k;
            let y = trace.output[idx];
            let delta = 2.0 * (y - target[idx]) / norm * y * (1.0 - y);
            grads.b_heads[head][k] += delta;
            let row = k * HIDDEN_DIM;
            for h in 0..HIDDEN_DIM {
                grads.w_heads[head][row + h] += delta * trace.hidden[h];
                delta_hidden[h] += delta * model.w_heads[head][row + h];
            }
        }
    }

    // Hidden layer: through dropout mask and ReLU gate.
    for h in 0..HIDDEN_DIM {
        let gate = if trace.hidden_pre[h] > 0.0 {
            trace.mask[h]
        } else {
            0.0
        };
        let delta = delta_hidden[h] * gate;
        if delta == 0.0 {
            continue;
        }
        grads.b_hidden[h] += delta;
        let row = h * INPUT_DIM;
        for i in 0..INPUT_DIM {
            grads.w_hidden[row + i] += delta * window[i];
        }
    }
    trace.output
}

/// Analytic gradients of the composite loss over a batch, inference mode
/// (no dropout). Matches [`composite_loss`] over the same predictions.
pub fn loss_gradients(
    model: &MLPModel,
    windows: &[[f64; INPUT_DIM]],
    targets: &[[f64; TARGET_DIM]],
) -> Grads {
    assert_eq!(windows.len(), targets.len());
    let mut grads = Grads::zeroed();
    for (w, t) in windows.iter().zip(targets) {
        accumulate_gradients(model, w, t, windows.len(), None, &mut grads);
    }
    grads
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Grads,
    v: Grads,
}

impl Adam {
    fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Grads::zeroed(),
            v: Grads::zeroed(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn update_slice(
        params: &mut [f64],
        grads: &[f64],
        m: &mut [f64],
        v: &mut [f64],
        lr_t: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) {
        for i in 0..params.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
            params[i] -= lr_t * m[i] / (v[i].sqrt() + eps);
        }
    }

    fn apply(&mut self, model: &mut MLPModel, grads: &Grads) {
        self.step += 1;
        let t = self.step as f64;
        // Bias-corrected step size.
        let lr_t = self.lr * (1.0 - self.beta2.powf(t)).sqrt() / (1.0 - self.beta1.powf(t));
        Self::update_slice(
            &mut model.w_hidden,
            &grads.w_hidden,
            &mut self.m.w_hidden,
            &mut self.v.w_hidden,
            lr_t,
            self.beta1,
            self.beta2,
            self.eps,
        );
        Self::update_slice(
            &mut model.b_hidden,
            &grads.b_hidden,
            &mut self.m.b_hidden,
            &mut self.v.b_hidden,
            lr_t,
            self.beta1,
            self.beta2,
            self.eps,
        );
        for h in 0..N_HEADS {
            Self::update_slice(
                &mut model.w_heads[h],
                &grads.w_heads[h],
                &mut self.m.w_heads[h],
                &mut self.v.w_heads[h],
                lr_t,
                self.beta1,
                self.beta2,
                self.eps,
            );
            Self::update_slice(
                &mut model.b_heads[h],
                &grads.b_heads[h],
                &mut self.m.b_heads[h],
                &mut self.v.b_heads[h],
                lr_t,
                self.beta1,
                self.beta2,
                self.eps,
            );
        }
    }
}

fn glorot_init(model: &mut MLPModel, rng: &mut Rng) {
    let s_hidden = (6.0 / (INPUT_DIM + HIDDEN_DIM) as f64).sqrt();
    for w in model.w_hidden.iter_mut() {
        *w = rng.uniform(-s_hidden, s_hidden);
    }
    let s_head = (6.0 / (HIDDEN_DIM + HEAD_DIM) as f64).sqrt();
    for head in 0..N_HEADS {
        for w in model.w_heads[head].iter_mut() {
            *w = rng.uniform(-s_head, s_head);
        }
    }
    // Biases start at zero.
}

struct Dataset {
    windows: Vec<[f64; INPUT_DIM]>,
    targets: Vec<[f64; TARGET_DIM]>,
}

fn build_dataset(
    items: &[(SignatureTrajectory, JointFeatureSeries)],
    indices: &[usize],
    model_scalers: &super::ScalerSet,
) -> Dataset {
    let mut windows = Vec::new();
    let mut targets = Vec::new();
    for &i in indices {
        let (signature, features) = &items[i];
        let w = build_windows(signature, model_scalers);
        for (row, window) in w.into_iter().enumerate() {
            windows.push(window);
            targets.push(model_scalers.scale_targets(&target_vector(features, row)));
        }
    }
    Dataset { windows, targets }
}

fn validation_loss(model: &MLPModel, data: &Dataset) -> super::LossBreakdown {
    let preds: Vec<[f64; TARGET_DIM]> = data
        .windows
        .iter()
        .map(|w| super::mlp_forward(model, w, None))
        .collect();
    composite_loss(&preds, &data.targets)
}

/// Trains the estimator on signature/feature pairs.
///
/// A seeded 20% of the signatures (whole signatures, never windows) is held
/// out for validation; scalers are fitted on the remaining training
/// signatures only. Training stops when the validation loss fails to improve
/// for `patience` consecutive epochs and returns the best-validation
/// snapshot. Deterministic for a fixed config.
pub fn train(
    items: &[(SignatureTrajectory, JointFeatureSeries)],
    cfg: &TrainingConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if items.len() < 2 {
        return Err(Error::Config(format!(
            "training needs >= 2 signatures to split validation, got {}",
            items.len()
        )));
    }
    for (signature, features) in items {
        signature.validate()?;
        features.validate()?;
        if signature.samples.len() != features.len() {
            return Err(Error::Shape {
                what: "training pair".into(),
                expected: format!("{} feature rows", signature.samples.len()),
                got: format!("{}", features.len()),
            });
        }
    }

    let root = Rng::new(cfg.seed);
    let mut indices: Vec<usize> = (0..items.len()).collect();
    root.derive("val-split", 0).shuffle(&mut indices);
    let n_val = ((items.len() as f64 * cfg.val_fraction).round() as usize)
        .max(1)
        .min(items.len() - 1);
    let (val_idx, train_idx) = indices.split_at(n_val);

    let train_items: Vec<(SignatureTrajectory, JointFeatureSeries)> =
        train_idx.iter().map(|&i| items[i].clone()).collect();
    let scalers = fit_scalers(&train_items)?;

    let train_data = build_dataset(items, train_idx, &scalers);
    let val_data = build_dataset(items, val_idx, &scalers);

    let mut model = MLPModel::zeroed(scalers);
    model.dropout_rate = cfg.dropout_rate;
    model.seed = cfg.seed;
    glorot_init(&mut model, &mut root.derive("init", 0));

    let mut adam = Adam::new(cfg.learning_rate);
    let mut history = Vec::new();
    let mut best: Option<(f64, MLPModel, usize)> = None;
    let mut stale = 0usize;

    for epoch in 0..cfg.max_epochs {
        let mut order: Vec<usize> = (0..train_data.windows.len()).collect();
        root.derive("epoch-shuffle", epoch as u64)
            .shuffle(&mut order);
        let mut dropout_rng = root.derive("dropout", epoch as u64);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Grads::zeroed();
            let mut batch_loss = 0.0;
            for &s in batch {
                let rng = if cfg.dropout_rate > 0.0 {
                    Some(&mut dropout_rng)
                } else {
                    None
                };
                let out = accumulate_gradients(
                    &model,
                    &train_data.windows[s],
                    &train_data.targets[s],
                    batch.len(),
                    rng,
                    &mut grads,
                );
                for (y, t) in out.iter().zip(&train_data.targets[s]) {
                    batch_loss += (y - t) * (y - t);
                }
            }
            batch_loss /= (batch.len() * HEAD_DIM) as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    msg: format!("non-finite loss {batch_loss}"),
                });
            }
            adam.apply(&mut model, &grads);
            epoch_loss += batch_loss;
            batches += 1;
        }
        epoch_loss /= batches.max(1) as f64;

        let val = validation_loss(&model, &val_data);
        if !val.total.is_finite() {
            return Err(Error::Training {
                epoch,
                msg: "non-finite validation loss".into(),
            });
        }
        history.push(EpochStats {
            epoch,
            train_loss: epoch_loss,
            val_loss: val.total,
            val_theta: val.theta,
            val_omega: val.omega,
            val_tau: val.tau,
        });

        let improved = best.as_ref().is_none_or(|(b, _, _)| val.total < *b);
        if improved {
            model.trained_epochs = (epoch + 1) as u32;
            best = Some((val.total, model.clone(), epoch));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    let (_, best_model, best_epoch) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model: best_model,
        history,
        best_epoch,
    })
}

/// Signature/feature pairs for one user, keyed like the corpus.
pub type PairedUser = (
    Vec<(SignatureTrajectory, JointFeatureSeries)>, // genuine
    Vec<(SignatureTrajectory, JointFeatureSeries)>, // forgeries
);

pub type PairedCorpus = BTreeMap<String, PairedUser>;

#[derive(Debug, Clone)]
pub struct CrossValOutcome {
    pub fold_metrics: Vec<EstimationMetrics>,
    pub mean_metrics: EstimationMetrics,
    /// Estimated features for every signature, from the model whose test
    /// fold contained its user.
    pub estimated: FeatureSet,
    /// user -> fold index, for audit.
    pub fold_of_user: BTreeMap<String, usize>,
}

/// k-fold cross-validated estimation: users are partitioned into k seeded
/// folds; each fold's signatures are estimated by a model trained on the
/// other folds. Metrics are scaled-space MAE/MSE per fold plus their mean.
pub fn cross_validate(
    data: &PairedCorpus,
    cfg: &TrainingConfig,
    k: usize,
) -> Result<CrossValOutcome> {
    cfg.validate()?;
    if k < 2 {
        return Err(Error::Config("cross-validation needs k >= 2".into()));
    }
    if data.len() < k {
        return Err(Error::Config(format!(
            "cross-validation needs >= {k} users, got {}",
            data.len()
        )));
    }

    let mut users: Vec<&String> = data.keys().collect();
    Rng::new(cfg.seed).derive("cv-folds", 0).shuffle(&mut users);
    let mut fold_of_user = BTreeMap::new();
    for (i, user) in users.iter().enumerate() {
        fold_of_user.insert((*user).clone(), i % k);
    }

    let mut fold_metrics = Vec::with_capacity(k);
    let mut estimated = FeatureSet::default();
    for fold in 0..k {
        let mut train_items = Vec::new();
        let mut test_items = Vec::new();
        for (user, (genuine, forgeries)) in data {
            let dst = if fold_of_user[user] == fold {
                &mut test_items
            } else {
                &mut train_items
            };
            dst.extend(genuine.iter().cloned());
            dst.extend(forgeries.iter().cloned());
        }
        let fold_cfg = TrainingConfig {
            seed: cfg
                .seed
                .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(fold as u64 + 1)),
            ..cfg.clone()
        };
        let outcome = train(&train_items, &fold_cfg)?;
        fold_metrics.push(evaluate_scaled(&outcome.model, &test_items)?);

        for (user, (genuine, forgeries)) in data {
            if fold_of_user[user] != fold {
                continue;
            }
            let mut user_features = UserFeatures::default();
            for (signature, _) in genuine {
                user_features
                    .genuine
                    .push(estimate_features(&outcome.model, signature)?);
            }
            for (signature, _) in forgeries {
                user_features
                    .forgeries
                    .push(estimate_features(&outcome.model, signature)?);
            }
            estimated.users.insert(user.clone(), user_features);
        }
    }

    Ok(CrossValOutcome {
        mean_metrics: EstimationMetrics::mean(&fold_metrics),
        fold_metrics,
        estimated,
        fold_of_user,
    })
}
