//! DTW-based verification over joint-feature matrices.
//!
//! A feature matrix is built per signature: channels min-max normalized
//! within the signature, first and second regression derivatives appended,
//! then every column z-scored. Questioned signatures are scored by their
//! minimum band-constrained DTW distance to a reference set, normalized in
//! two stages — by warping-path length for random-forgery decisions and by
//! the reference-set factor mu_R for skilled-forgery decisions.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::replay::JointFeatureSeries;

/// Which joint-feature group a matrix was built from. Joint 6's angular
/// velocity is constant by construction (the pen never spins about its own
/// axis), so the omega group drops that channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureGroup {
    Theta,
    Omega,
    Tau,
}

impl FeatureGroup {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureGroup::Theta => "theta",
            FeatureGroup::Omega => "omega",
            FeatureGroup::Tau => "tau",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "theta" => Some(FeatureGroup::Theta),
            "omega" => Some(FeatureGroup::Omega),
            "tau" => Some(FeatureGroup::Tau),
            _ => None,
        }
    }

    fn base_channels(&self) -> usize {
        match self {
            FeatureGroup::Omega => 5,
            _ => 6,
        }
    }
}

/// M x N matrix of verification features, row per sample.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
    pub group: FeatureGroup,
    /// Columns that were constant before z-scoring (left at zero).
    pub constant_cols: BTreeSet<usize>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, group: FeatureGroup) -> Result<Self> {
        let n = rows.first().map_or(0, |r| r.len());
        if n == 0 || rows.is_empty() {
            return Err(Error::Validation("empty feature matrix".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * n);
        for r in &rows {
            if r.len() != n {
                return Err(Error::Shape {
                    what: "feature matrix row".into(),
                    expected: format!("{n} columns"),
                    got: format!("{}", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(FeatureMatrix {
            data,
            rows: rows.len(),
            cols: n,
            group,
            constant_cols: BTreeSet::new(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scale(&self, factor: f64) -> FeatureMatrix {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= factor;
        }
        out
    }
}

/// Derivative by second-order regression with edge replication:
/// `dx_i = (1 (x_{i+1} - x_{i-1}) + 2 (x_{i+2} - x_{i-2})) / 10`.
/// Index spacing is treated as unit; exact for linear input.
pub fn regression_derivative(series: &[f64]) -> Vec<f64> {
    let m = series.len();
    let at = |i: isize| -> f64 {
        let clamped = i.clamp(0, m as isize - 1) as usize;
        series[clamped]
    };
    (0..m as isize)
        .map(|i| (1.0 * (at(i + 1) - at(i - 1)) + 2.0 * (at(i + 2) - at(i - 2))) / 10.0)
        .collect()
}

fn min_max_unit(series: &[f64]) -> (Vec<f64>, bool) {
    let lo = series.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (series.iter().map(|v| (v - lo) / (hi - lo)).collect(), false)
    } else {
        (vec![0.5; series.len()], true)
    }
}

fn z_score(column: &mut [f64]) -> bool {
    let m = column.len() as f64;
    let mean = column.iter().sum::<f64>() / m;
    let var = column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
    if var <= 0.0 {
        column.iter_mut().for_each(|v| *v = 0.0);
        return true;
    }
    let std = var.sqrt();
    column.iter_mut().for_each(|v| *v = (*v - mean) / std);
    false
}

/// Builds the verification matrix for one signature's feature series:
/// per-channel min-max to \[0,1\] within the signature, first and second
/// regression derivatives appended, then per-column z-score. Column order is
/// all base channels, then all first derivatives, then all second
/// derivatives.
pub fn build_feature_matrix(
    features: &JointFeatureSeries,
    group: FeatureGroup,
) -> Result<FeatureMatrix> {
    features.validate()?;
    let m = features.len();
    let base = group.base_channels();
    let channel = |c: usize| -> Vec<f64> {
        (0..m)
            .map(|i| match group {
                FeatureGroup::Theta => features.theta[i][c],
                FeatureGroup::Omega => features.omega[i][c],
                FeatureGroup::Tau => features.tau[i][c],
            })
            .collect()
    };

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(base * 3);
    for c in 0..base {
        let (unit, _) = min_max_unit(&channel(c));
        columns.push(unit);
    }
    for c in 0..base {
        columns.push(regression_derivative(&columns[c]));
    }
    for c in 0..base {
        columns.push(regression_derivative(&columns[base + c]));
    }

    let mut constant_cols = BTreeSet::new();
    for (idx, col) in columns.iter_mut().enumerate() {
        if z_score(col) {
            constant_cols.insert(idx);
        }
    }

    let n = columns.len();
    let mut data = vec![0.0; m * n];
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            data[i * n + j] = *v;
        }
    }
    Ok(FeatureMatrix {
        data,
        rows: m,
        cols: n,
        group,
        constant_cols,
    })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Band half-width used by [`dtw_distance`]: M/10 of the rows with a floor
/// that keeps length-mismatched pairs feasible.
pub fn default_band(rows_a: usize, rows_b: usize) -> usize {
    let tenth = rows_a.div_ceil(10);
    let mismatch = rows_a.abs_diff(rows_b) + 1;
    tenth.max(mismatch)
}

/// Band-constrained DTW with steps {(1,0),(0,1),(1,1)}, accumulating
/// Euclidean row distances. Returns the total distance and the number of
/// cells on the optimal warping path (ties broken diagonal-first).
pub fn dtw_distance(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<(f64, usize)> {
    dtw_distance_banded(a, b, default_band(a.rows(), b.rows()))
}

/// As [`dtw_distance`] with an explicit Sakoe-Chiba half-width around the
/// scaled diagonal.
pub fn dtw_distance_banded(
    a: &FeatureMatrix,
    b: &FeatureMatrix,
    band: usize,
) -> Result<(f64, usize)> {
    if a.cols() != b.cols() {
        return Err(Error::Shape {
            what: "DTW operands".into(),
            expected: format!("{} columns", a.cols()),
            got: format!("{}", b.cols()),
        });
    }
    let (ma, mb) = (a.rows(), b.rows());
    let width = 2 * band + 1;
    let idx = |i: usize, j_off: usize| i * width + j_off;
    let center = |i: usize| -> isize {
        // Scaled diagonal: row i of A maps near row i*mb/ma of B.
        ((i as f64) * (mb as f64) / (ma as f64)).round() as isize
    };
    let mut cost = vec![f64::INFINITY; ma * width];
    let mut came: Vec<u8> = vec![0; ma * width]; // 1 diag, 2 up (i-1,j), 3 left (i,j-1)

    for i in 0..ma {
        let c = center(i);
        for j_off in 0..width {
            let j = c - band as isize + j_off as isize;
            if j < 0 || j >= mb as isize {
                continue;
            }
            let j = j as usize;
            let d = euclidean(a.row(i), b.row(j));
            let fetch = |pi: usize, pj: usize| -> f64 {
                let pc = center(pi);
                let off = pj as isize - (pc - band as isize);
                if off < 0 || off >= width as isize {
                    f64::INFINITY
                } else {
                    cost[idx(pi, off as usize)]
                }
            };
            if i == 0 && j == 0 {
                cost[idx(i, j_off)] = d;
                came[idx(i, j_off)] = 0;
                continue;
            }
            let diag = if i > 0 && j > 0 {
                fetch(i - 1, j - 1)
            } else {
                f64::INFINITY
            };
            let up = if i > 0 {
                fetch(i - 1, j)
            } else {
                f64::INFINITY
            };
            let left = if j > 0 {
                fetch(i, j - 1)
            } else {
                f64::INFINITY
            };
            let (best, step) = if diag <= up && diag <= left {
                (diag, 1)
            } else if up <= left {
                (up, 2)
            } else {
                (left, 3)
            };
            if best.is_finite() {
                cost[idx(i, j_off)] = best + d;
                came[idx(i, j_off)] = step;
            }
        }
    }

    let end_off = (mb as isize - 1) - (center(ma - 1) - band as isize);
    if end_off < 0 || end_off >= width as isize {
        return Err(Error::Validation(
            "DTW band excludes the terminal cell".into(),
        ));
    }
    let total = cost[idx(ma - 1, end_off as usize)];
    if !total.is_finite() {
        return Err(Error::Validation("DTW band admits no feasible path".into()));
    }

    // Backtrack for the path length.
    let mut path_len = 1usize;
    let (mut i, mut j) = (ma - 1, mb as isize - 1);
    loop {
        let off = j - (center(i) - band as isize);
        match came[idx(i, off as usize)] {
            0 => break,
            1 => {
                i -= 1;
                j -= 1;
            }
            2 => i -= 1,
            _ => j -= 1,
        }
        path_len += 1;
    }
    Ok((total, path_len))
}

/// Verification score of a questioned signature against a reference set.
#[derive(Debug, Clone, Copy)]
pub struct VerificationScore {
    /// Minimum DTW distance over the references.
    pub s_r: f64,
    /// Warping-path length of the minimizing alignment.
    pub path_len: usize,
    /// Stage 1: s_r / |p|, used against random forgeries.
    pub s_hat_1: f64,
    /// Stage 2: s_r / mu_R, used against skilled forgeries.
    pub s_hat_2: f64,
    pub mu_r: f64,
}

/// Reference-set statistics computed once per enrolment: mu_R is the mean
/// path-length-normalized DTW distance over reference pairs.
#[derive(Debug, Clone, Copy)]
pub struct RefStats {
    pub mu_r: f64,
}

impl RefStats {
    pub fn compute(refs: &[FeatureMatrix]) -> Result<RefStats> {
        if refs.len() < 2 {
            return Err(Error::Protocol(format!(
                "reference statistics need >= 2 references, got {}",
                refs.len()
            )));
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..refs.len() {
            for j in (i + 1)..refs.len() {
                let (d, p) = dtw_distance(&refs[i], &refs[j])?;
                sum += d / p as f64;
                count += 1;
            }
        }
        let mu_r = sum / count as f64;
        if mu_r <= 0.0 {
            return Err(Error::DegenerateReferences);
        }
        Ok(RefStats { mu_r })
    }
}

/// Scores a questioned matrix against the reference set.
pub fn score_questioned(
    questioned: &FeatureMatrix,
    refs: &[FeatureMatrix],
    stats: &RefStats,
) -> Result<VerificationScore> {
    if refs.len() < 2 {
        return Err(Error::Protocol("scoring needs >= 2 references".into()));
    }
    let mut best: Option<(f64, usize)> = None;
    for r in refs {
        let (d, p) = dtw_distance(questioned, r)?;
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, p));
        }
    }
    let (s_r, path_len) = best.expect("non-empty reference set");
    Ok(VerificationScore {
        s_r,
        path_len,
        s_hat_1: s_r / path_len as f64,
        s_hat_2: s_r / stats.mu_r,
        mu_r: stats.mu_r,
    })
}
