//! Joint-feature estimation from pen trajectories.
//!
//! A small three-headed MLP maps an 11-point sliding window of scaled
//! (x, y) coordinates — the point itself plus its five predecessors and five
//! successors — to the eighteen joint features (theta, omega, tau; six
//! joints each). One ReLU hidden layer of twelve units, inverted dropout
//! during training, and a sigmoid head per feature group keep the outputs
//! in (0, 1); min-max scalers fitted on training data map both sides
//! between physical units and the unit interval.

// Index loops mirror the weight-matrix layout on purpose.
#![allow(clippy::needless_range_loop)]
mod model_io;
mod train;

pub use model_io::{load_model, save_model};
pub use train::{
    CrossValOutcome, EpochStats, Grads, PairedCorpus, PairedUser, TrainOutcome, TrainingConfig,
    cross_validate, loss_gradients, train,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::{FeatureSource, JointFeatureSeries};
use crate::rng::Rng;
use crate::signature::SignatureTrajectory;

pub const WINDOW_HALF: usize = 5;
pub const WINDOW_POINTS: usize = 2 * WINDOW_HALF + 1;
pub const INPUT_DIM: usize = 2 * WINDOW_POINTS;
pub const HIDDEN_DIM: usize = 12;
pub const HEAD_DIM: usize = 6;
pub const N_HEADS: usize = 3;
pub const TARGET_DIM: usize = N_HEADS * HEAD_DIM;

/// Target vector layout: theta 1..6, omega 1..6, tau 1..6.
pub fn target_vector(features: &JointFeatureSeries, row: usize) -> [f64; TARGET_DIM] {
    let mut out = [0.0; TARGET_DIM];
    out[..6].copy_from_slice(&features.theta[row]);
    out[6..12].copy_from_slice(&features.omega[row]);
    out[12..].copy_from_slice(&features.tau[row]);
    out
}

/// Per-dimension min/max scalers for the 22 window inputs and 18 targets.
/// Fitted exclusively on training data; constant dimensions are flagged and
/// map to 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerSet {
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
    pub target_min: Vec<f64>,
    pub target_max: Vec<f64>,
}

impl ScalerSet {
    pub fn validate(&self) -> Result<()> {
        if self.input_min.len() != INPUT_DIM || self.input_max.len() != INPUT_DIM {
            return Err(Error::Shape {
                what: "input scalers".into(),
                expected: format!("{INPUT_DIM} dims"),
                got: format!("{}/{}", self.input_min.len(), self.input_max.len()),
            });
        }
        if self.target_min.len() != TARGET_DIM || self.target_max.len() != TARGET_DIM {
            return Err(Error::Shape {
                what: "target scalers".into(),
                expected: format!("{TARGET_DIM} dims"),
                got: format!("{}/{}", self.target_min.len(), self.target_max.len()),
            });
        }
        for (lo, hi) in self
            .input_min
            .iter()
            .zip(&self.input_max)
            .chain(self.target_min.iter().zip(&self.target_max))
        {
            if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
                return Err(Error::Validation(format!("bad scaler range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// A dimension whose training range is negligible against its magnitude
    /// is treated as constant: joints the arm never moves carry only solver
    /// noise, which min-max scaling would otherwise blow up into
    /// unlearnable full-range targets.
    fn effectively_constant(lo: f64, hi: f64) -> bool {
        hi - lo <= 1e-6 * lo.abs().max(hi.abs()).max(1.0)
    }

    pub fn input_constant(&self, dim: usize) -> bool {
        Self::effectively_constant(self.input_min[dim], self.input_max[dim])
    }

    pub fn target_constant(&self, dim: usize) -> bool {
        Self::effectively_constant(self.target_min[dim], self.target_max[dim])
    }

    /// Scales a raw window into \[0,1\], clamping out-of-training-range values.
    pub fn scale_window(&self, raw: &[f64; INPUT_DIM]) -> [f64; INPUT_DIM] {
        std::array::from_fn(|d| {
            if self.input_constant(d) {
                0.5
            } else {
                ((raw[d] - self.input_min[d]) / (self.input_max[d] - self.input_min[d]))
                    .clamp(0.0, 1.0)
            }
        })
    }

    /// Scales a physical target vector; test-set values may leave \[0,1\] and
    /// are deliberately not clamped.
    pub fn scale_targets(&self, raw: &[f64; TARGET_DIM]) -> [f64; TARGET_DIM] {
        std::array::from_fn(|d| {
            if self.target_constant(d) {
                0.5
            } else {
                (raw[d] - self.target_min[d]) / (self.target_max[d] - self.target_min[d])
            }
        })
    }

    /// Maps scaled predictions back to physical units. Constant dimensions
    /// return their training value.
    pub fn unscale_targets(&self, scaled: &[f64; TARGET_DIM]) -> [f64; TARGET_DIM] {
        std::array::from_fn(|d| {
            if self.target_constant(d) {
                (self.target_min[d] + self.target_max[d]) / 2.0
            } else {
                self.target_min[d] + scaled[d] * (self.target_max[d] - self.target_min[d])
            }
        })
    }
}

/// Raw (unscaled) sliding windows, one per sample, boundaries padded by edge
/// replication. Layout: (x, y) pairs from point i-5 through i+5.
pub fn raw_windows(signature: &SignatureTrajectory) -> Vec<[f64; INPUT_DIM]> {
    let m = signature.samples.len();
    let at = |i: isize| -> (f64, f64) {
        let c = i.clamp(0, m as isize - 1) as usize;
        (signature.samples[c].x, signature.samples[c].y)
    };
    (0..m as isize)
        .map(|i| {
            let mut w = [0.0; INPUT_DIM];
            for (slot, off) in (-(WINDOW_HALF as isize)..=WINDOW_HALF as isize).enumerate() {
                let (x, y) = at(i + off);
                w[2 * slot] = x;
                w[2 * slot + 1] = y;
            }
            w
        })
        .collect()
}

/// Scaled windows ready for the forward pass, one per sample.
pub fn build_windows(
    signature: &SignatureTrajectory,
    scalers: &ScalerSet,
) -> Vec<[f64; INPUT_DIM]> {
    raw_windows(signature)
        .into_iter()
        .map(|w| scalers.scale_window(&w))
        .collect()
}

/// Fits input and target scalers over a training set: global per-dimension
/// min/max over every window and every feature row.
pub fn fit_scalers(items: &[(SignatureTrajectory, JointFeatureSeries)]) -> Result<ScalerSet> {
    if items.is_empty() {
        return Err(Error::Config(
            "cannot fit scalers on an empty training set".into(),
        ));
    }
    let mut input_min = vec![f64::INFINITY; INPUT_DIM];
    let mut input_max = vec![f64::NEG_INFINITY; INPUT_DIM];
    let mut target_min = vec![f64::INFINITY; TARGET_DIM];
    let mut target_max = vec![f64::NEG_INFINITY; TARGET_DIM];
    for (signature, features) in items {
        if signature.samples.len() != features.len() {
            return Err(Error::Shape {
                what: "training pair".into(),
                expected: format!("{} feature rows", signature.samples.len()),
                got: format!("{}", features.len()),
            });
        }
        for w in raw_windows(signature) {
            for d in 0..INPUT_DIM {
                input_min[d] = input_min[d].min(w[d]);
                input_max[d] = input_max[d].max(w[d]);
            }
        }
        for row in 0..features.len() {
            let t = target_vector(features, row);
            for d in 0..TARGET_DIM {
                target_min[d] = target_min[d].min(t[d]);
                target_max[d] = target_max[d].max(t[d]);
            }
        }
    }
    let scalers = ScalerSet {
        input_min,
        input_max,
        target_min,
        target_max,
    };
    scalers.validate()?;
    Ok(scalers)
}

/// The three-headed regressor with its fitted scalers.
#[derive(Debug, Clone, PartialEq)]
pub struct MLPModel {
    /// Hidden weights, row-major HIDDEN_DIM x INPUT_DIM.
    pub w_hidden: Vec<f64>,
    pub b_hidden: Vec<f64>,
    /// One head per feature group (theta, omega, tau), HEAD_DIM x HIDDEN_DIM.
    pub w_heads: [Vec<f64>; N_HEADS],
    pub b_heads: [Vec<f64>; N_HEADS],
    pub dropout_rate: f64,
    pub scalers: ScalerSet,
    pub trained_epochs: u32,
    pub seed: u64,
}

impl MLPModel {
    pub fn zeroed(scalers: ScalerSet) -> Self {
        MLPModel {
            w_hidden: vec![0.0; HIDDEN_DIM * INPUT_DIM],
            b_hidden: vec![0.0; HIDDEN_DIM],
            w_heads: std::array::from_fn(|_| vec![0.0; HEAD_DIM * HIDDEN_DIM]),
            b_heads: std::array::from_fn(|_| vec![0.0; HEAD_DIM]),
            dropout_rate: 0.3,
            scalers,
            trained_epochs: 0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scalers.validate()?;
        let shapes = [
            ("w_hidden", self.w_hidden.len(), HIDDEN_DIM * INPUT_DIM),
            ("b_hidden", self.b_hidden.len(), HIDDEN_DIM),
        ];
        for (what, got, want) in shapes {
            if got != want {
                return Err(Error::Shape {
                    what: what.into(),
                    expected: format!("{want}"),
                    got: format!("{got}"),
                });
            }
        }
        for h in 0..N_HEADS {
            if self.w_heads[h].len() != HEAD_DIM * HIDDEN_DIM || self.b_heads[h].len() != HEAD_DIM {
                return Err(Error::Shape {
                    what: format!("head {h}"),
                    expected: format!("{}x{}", HEAD_DIM, HIDDEN_DIM),
                    got: format!("{}/{}", self.w_heads[h].len(), self.b_heads[h].len()),
                });
            }
        }
        let all_finite = self
            .w_hidden
            .iter()
            .chain(&self.b_hidden)
            .chain(self.w_heads.iter().flatten())
            .chain(self.b_heads.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Validation("non-finite model weight".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Validation(format!(
                "bad dropout rate {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Intermediate activations kept for backprop.
pub(crate) struct ForwardTrace {
    pub hidden_pre: [f64; HIDDEN_DIM],
    /// Post-ReLU, post-dropout hidden activations.
    pub hidden: [f64; HIDDEN_DIM],
    /// Inverted-dropout factor per unit: 0 dropped, 1/(1-p) kept, 1 inference.
    pub mask: [f64; HIDDEN_DIM],
    pub output: [f64; TARGET_DIM],
}

pub(crate) fn forward_trace(
    model: &MLPModel,
    window: &[f64; INPUT_DIM],
    dropout_rng: Option<&mut Rng>,
) -> ForwardTrace {
    let mut hidden_pre = [0.0; HIDDEN_DIM];
    for h in 0..HIDDEN_DIM {
        let mut z = model.b_hidden[h];
        let row = &model.w_hidden[h * INPUT_DIM..(h + 1) * INPUT_DIM];
        for (w, x) in row.iter().zip(window.iter()) {
            z += w * x;
        }
        hidden_pre[h] = z;
    }
    let mut mask = [1.0; HIDDEN_DIM];
    if let Some(rng) = dropout_rng
        && model.dropout_rate > 0.0
    {
        let keep = 1.0 - model.dropout_rate;
        for m in mask.iter_mut() {
            *m = if rng.bernoulli(model.dropout_rate) {
                0.0
            } else {
                1.0 / keep
            };
        }
    }
    let mut hidden = [0.0; HIDDEN_DIM];
    for h in 0..HIDDEN_DIM {
        hidden[h] = hidden_pre[h].max(0.0) * mask[h];
    }
    let mut output = [0.0; TARGET_DIM];
    for head in 0..N_HEADS {
        for k in 0..HEAD_DIM {
            let mut z = model.b_heads[head][k];
            let row = &model.w_heads[head][k * HIDDEN_DIM..(k + 1) * HIDDEN_DIM];
            for (w, h) in row.iter().zip(hidden.iter()) {
                z += w * h;
            }
            output[head * HEAD_DIM + k] = sigmoid(z);
        }
    }
    ForwardTrace {
        hidden_pre,
        hidden,
        mask,
        output,
    }
}

/// Forward pass. `dropout_rng: Some(..)` selects training mode (inverted
/// dropout); `None` is inference, a plain affine + sigmoid stack.
pub fn mlp_forward(
    model: &MLPModel,
    window: &[f64; INPUT_DIM],
    dropout_rng: Option<&mut Rng>,
) -> [f64; TARGET_DIM] {
    forward_trace(model, window, dropout_rng).output
}

/// Composite loss: per-head MSE over samples and the six head dimensions,
/// summed across the three heads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub theta: f64,
    pub omega: f64,
    pub tau: f64,
}

pub fn composite_loss(
    predictions: &[[f64; TARGET_DIM]],
    targets: &[[f64; TARGET_DIM]],
) -> LossBreakdown {
    assert_eq!(
        predictions.len(),
        targets.len(),
        "prediction/target batch mismatch"
    );
    let n = predictions.len().max(1) as f64;
    let mut per_head = [0.0; N_HEADS];
    for (p, t) in predictions.iter().zip(targets) {
        for head in 0..N_HEADS {
            for k in 0..HEAD_DIM {
                let d = p[head * HEAD_DIM + k] - t[head * HEAD_DIM + k];
                per_head[head] += d * d;
            }
        }
    }
    for h in per_head.iter_mut() {
        *h /= n * HEAD_DIM as f64;
    }
    LossBreakdown {
        total: per_head.iter().sum(),
        theta: per_head[0],
        omega: per_head[1],
        tau: per_head[2],
    }
}

/// Per-group MAE/MSE in scaled units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationMetrics {
    /// theta, omega, tau.
    pub mae: [f64; N_HEADS],
    pub mse: [f64; N_HEADS],
}

impl EstimationMetrics {
    pub fn mean(folds: &[EstimationMetrics]) -> EstimationMetrics {
        let n = folds.len().max(1) as f64;
        let mut mae = [0.0; N_HEADS];
        let mut mse = [0.0; N_HEADS];
        for f in folds {
            for h in 0..N_HEADS {
                mae[h] += f.mae[h] / n;
                mse[h] += f.mse[h] / n;
            }
        }
        EstimationMetrics { mae, mse }
    }
}

/// Scaled-space estimation error of `model` on signature/feature pairs.
pub fn evaluate_scaled(
    model: &MLPModel,
    items: &[(SignatureTrajectory, JointFeatureSeries)],
) -> Result<EstimationMetrics> {
    let mut abs = [0.0; N_HEADS];
    let mut sq = [0.0; N_HEADS];
    let mut count = 0usize;
    for (signature, features) in items {
        if signature.samples.len() != features.len() {
            return Err(Error::Shape {
                what: "evaluation pair".into(),
                expected: format!("{} rows", signature.samples.len()),
                got: format!("{}", features.len()),
            });
        }
        let windows = build_windows(signature, &model.scalers);
        for (row, window) in windows.iter().enumerate() {
            let pred = mlp_forward(model, window, None);
            let truth = model.scalers.scale_targets(&target_vector(features, row));
            for head in 0..N_HEADS {
                for k in 0..HEAD_DIM {
                    let d = pred[head * HEAD_DIM + k] - truth[head * HEAD_DIM + k];
                    abs[head] += d.abs();
                    sq[head] += d * d;
                }
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Validation("no samples to evaluate".into()));
    }
    let denom = (count * HEAD_DIM) as f64;
    Ok(EstimationMetrics {
        mae: std::array::from_fn(|h| abs[h] / denom),
        mse: std::array::from_fn(|h| sq[h] / denom),
    })
}

/// Estimates the joint features of a signature with a trained model
/// (inference mode), returning a series aligned 1:1 with the samples in
/// physical units.
pub fn estimate_features(
    model: &MLPModel,
    signature: &SignatureTrajectory,
) -> Result<JointFeatureSeries> {
    model.validate()?;
    let windows = build_windows(signature, &model.scalers);
    let mut theta = Vec::with_capacity(windows.len());
    let mut omega = Vec::with_capacity(windows.len());
    let mut tau = Vec::with_capacity(windows.len());
    for window in &windows {
        let scaled = mlp_forward(model, window, None);
        let physical = model.scalers.unscale_targets(&scaled);
        theta.push(std::array::from_fn(|j| physical[j]));
        omega.push(std::array::from_fn(|j| physical[6 + j]));
        tau.push(std::array::from_fn(|j| physical[12 + j]));
    }
    let series = JointFeatureSeries {
        t: signature.samples.iter().map(|s| s.t).collect(),
        theta,
        omega,
        tau,
        source: FeatureSource::Estimated,
        user_id: signature.user_id.clone(),
        label: signature.label,
        session: signature.session,
    };
    series.validate()?;
    Ok(series)
}
