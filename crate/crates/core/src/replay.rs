//! Replays a signature on the simulated arm and emits per-sample joint
//! features.
//!
//! Pipeline: scale the signature into a writing box on the work surface,
//! solve pen-axis IK per waypoint (seeded by the previous solution), fit a
//! cubic spline through the joint waypoints, sample it at the control rate,
//! run inverse dynamics per tick, convert torques to motor currents and
//! back (the same measurement loop a real controller closes), then resample
//! all channels onto the signature's own timestamps so the output aligns
//! row-for-row with the input.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::robot::{
    IkSettings, JointState, KinematicChain, N_JOINTS, current_from_torque, solve_ik_pen_axis,
    torque_from_current,
};
use crate::signature::{Label, SignatureTrajectory};
use crate::spline::CubicSpline;

pub const DEFAULT_CONTROL_RATE: f64 = 125.0;

/// Where on the work surface signatures are written.
#[derive(Debug, Clone, Copy)]
pub struct WorkspacePlacement {
    /// Center of the writing square, base frame, meters.
    pub surface_center: Vector3<f64>,
    /// Side of the writing square; signatures scale isotropically into it.
    pub box_size: f64,
    /// Height of pen-up travel above the surface.
    pub pen_lift: f64,
    /// Outward surface normal; the pen axis is held anti-parallel to it.
    pub pen_axis: Vector3<f64>,
    /// Arm posture used to seed IK at the first waypoint.
    pub home_posture: [f64; N_JOINTS],
}

impl Default for WorkspacePlacement {
    fn default() -> Self {
        WorkspacePlacement {
            surface_center: Vector3::new(0.40, 0.00, 0.10),
            box_size: 0.10,
            pen_lift: 0.005,
            pen_axis: Vector3::new(0.0, 0.0, 1.0),
            home_posture: [0.0, -1.2, 1.6, -1.9, -1.4, 0.3],
        }
    }
}

impl WorkspacePlacement {
    pub fn validate(&self, chain: &KinematicChain) -> Result<()> {
        if !(self.box_size > 0.0 && self.pen_lift > 0.0) {
            return Err(Error::Config("box_size and pen_lift must be > 0".into()));
        }
        if self.pen_axis.norm() < 1e-9 {
            return Err(Error::Config("pen_axis must be a nonzero vector".into()));
        }
        // IK probe of the four corners (pen down) proves the box reachable.
        let (u, v) = self.surface_axes();
        let h = self.box_size / 2.0;
        let mut seed = self.home_posture;
        for (cx, cy) in [(-h, -h), (-h, h), (h, -h), (h, h)] {
            let corner = self.surface_center + u * cx + v * cy;
            seed = solve_ik_pen_axis(
                chain,
                &corner,
                &(-self.pen_axis),
                &seed,
                &IkSettings::default(),
            )
            .map_err(|e| {
                Error::Config(format!(
                    "writing box corner ({cx:.3}, {cy:.3}) unreachable: {e}"
                ))
            })?;
        }
        Ok(())
    }

    /// Orthonormal in-plane axes (u, v) of the writing surface.
    fn surface_axes(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.pen_axis.normalize();
        let mut u = Vector3::x() - n * n.dot(&Vector3::x());
        if u.norm() < 1e-6 {
            u = Vector3::y() - n * n.dot(&Vector3::y());
        }
        let u = u.normalize();
        let v = n.cross(&u);
        (u, v)
    }
}

/// A timed Cartesian waypoint with pen-up flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub t: f64,
    pub position: Vector3<f64>,
    pub pen_down: bool,
}

/// Where a feature series came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSource {
    Simulated,
    Estimated,
}

impl FeatureSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureSource::Simulated => "simulated",
            FeatureSource::Estimated => "estimated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "simulated" => Some(FeatureSource::Simulated),
            "estimated" => Some(FeatureSource::Estimated),
            _ => None,
        }
    }
}

/// Per-sample joint features aligned 1:1 with the source signature:
/// M rows of (theta, omega, tau), six joints each.
#[derive(Debug, Clone, PartialEq)]
pub struct JointFeatureSeries {
    pub t: Vec<f64>,
    pub theta: Vec<[f64; N_JOINTS]>,
    pub omega: Vec<[f64; N_JOINTS]>,
    pub tau: Vec<[f64; N_JOINTS]>,
    pub source: FeatureSource,
    pub user_id: String,
    pub label: Label,
    pub session: u8,
}

impl JointFeatureSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.t.len();
        if m == 0 {
            return Err(Error::Validation("empty feature series".into()));
        }
        if self.theta.len() != m || self.omega.len() != m || self.tau.len() != m {
            return Err(Error::Shape {
                what: "feature series".into(),
                expected: format!("{m} rows in every channel group"),
                got: format!(
                    "theta {}, omega {}, tau {}",
                    self.theta.len(),
                    self.omega.len(),
                    self.tau.len()
                ),
            });
        }
        let finite = self.t.iter().all(|v| v.is_finite())
            && self
                .theta
                .iter()
                .chain(&self.omega)
                .chain(&self.tau)
                .all(|row| row.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Validation("non-finite feature value".into()));
        }
        Ok(())
    }
}

/// Scales a signature isotropically into the placement's writing box, maps
/// pen-up samples (pressure 0) to the lifted plane, and keeps the original
/// timestamps.
pub fn map_to_workspace(
    signature: &SignatureTrajectory,
    placement: &WorkspacePlacement,
) -> Result<Vec<Waypoint>> {
    signature.validate()?;
    let xs: Vec<f64> = signature.samples.iter().map(|s| s.x).collect();
    let ys: Vec<f64> = signature.samples.iter().map(|s| s.y).collect();
    let (min_x, max_x) = (
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (min_y, max_y) = (
        ys.iter().cloned().fold(f64::INFINITY, f64::min),
        ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let extent = (max_x - min_x).max(max_y - min_y);
    if extent <= 0.0 {
        return Err(Error::Validation(
            "signature has zero spatial extent, cannot scale to the writing box".into(),
        ));
    }
    let scale = placement.box_size / extent;
    let (cx, cy) = ((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);
    let (u, v) = placement.surface_axes();
    let n = placement.pen_axis.normalize();

    Ok(signature
        .samples
        .iter()
        .map(|s| {
            let pen_down = s.pressure.is_none_or(|p| p > 0.0);
            let lift = if pen_down { 0.0 } else { placement.pen_lift };
            Waypoint {
                t: s.t,
                position: placement.surface_center
                    + u * ((s.x - cx) * scale)
                    + v * ((s.y - cy) * scale)
                    + n * lift,
                pen_down,
            }
        })
        .collect())
}

/// Solves IK along the waypoints and resamples the joint path at the control
/// rate through a cubic spline; omega and accel are the spline's analytic
/// derivatives. The pen axis stays perpendicular to the surface at every
/// waypoint.
pub fn plan_joint_trajectory(
    chain: &KinematicChain,
    waypoints: &[Waypoint],
    placement: &WorkspacePlacement,
    control_rate: f64,
) -> Result<Vec<JointState>> {
    if waypoints.len() < 2 {
        return Err(Error::Validation("need >= 2 waypoints to plan".into()));
    }
    if !(control_rate > 0.0 && control_rate.is_finite()) {
        return Err(Error::Config(format!(
            "control rate must be > 0, got {control_rate}"
        )));
    }
    let pen_dir = -placement.pen_axis.normalize();
    // Planning solves far tighter than the public IK contract: waypoint
    // solver noise would otherwise leak into the spline derivatives of
    // joints that barely move.
    let settings = IkSettings {
        position_tolerance: 1e-8,
        orientation_tolerance: 1e-8,
        ..IkSettings::default()
    };
    let mut seed = placement.home_posture;
    let mut knots_t = Vec::with_capacity(waypoints.len());
    let mut knots_q: Vec<[f64; N_JOINTS]> = Vec::with_capacity(waypoints.len());
    for (index, wp) in waypoints.iter().enumerate() {
        let q =
            solve_ik_pen_axis(chain, &wp.position, &pen_dir, &seed, &settings).map_err(|e| {
                Error::Planning {
                    index,
                    source: Box::new(e),
                }
            })?;
        knots_t.push(wp.t);
        knots_q.push(q);
        seed = q;
    }

    let splines: Vec<CubicSpline> = (0..N_JOINTS)
        .map(|j| {
            let chan: Vec<f64> = knots_q.iter().map(|q| q[j]).collect();
            CubicSpline::fit(&knots_t, &chan)
        })
        .collect::<Result<_>>()?;

    let t0 = knots_t[0];
    let t_end = *knots_t.last().expect("non-empty");
    let dt = 1.0 / control_rate;
    let span = t_end - t0;
    // Ticks at the control rate; the final tick lands exactly on t_end when
    // the span divides evenly and is clamped to t_end otherwise.
    let n_ticks = (span * control_rate + 1e-9).floor() as usize + 1;
    let mut states = Vec::with_capacity(n_ticks + 1);
    for k in 0..n_ticks {
        let t = t0 + k as f64 * dt;
        states.push(sample_state(&splines, t));
    }
    if states.last().is_none_or(|s| s.t < t_end - 1e-9) {
        states.push(sample_state(&splines, t_end));
    }
    Ok(states)
}

fn sample_state(splines: &[CubicSpline], t: f64) -> JointState {
    let mut state = JointState::at(t, [0.0; N_JOINTS]);
    for (j, spline) in splines.iter().enumerate() {
        let (q, dq, ddq) = spline.eval(t);
        state.theta[j] = q;
        state.omega[j] = dq;
        state.accel[j] = ddq;
    }
    state
}

fn lerp_channel(ts: &[f64], values: &[[f64; N_JOINTS]], t: f64) -> [f64; N_JOINTS] {
    // ts is sorted and covers t (clamped at the ends).
    if t <= ts[0] {
        return values[0];
    }
    if t >= ts[ts.len() - 1] {
        return values[values.len() - 1];
    }
    let mut hi = ts.partition_point(|&x| x < t);
    if hi == 0 {
        hi = 1;
    }
    let lo = hi - 1;
    let w = (t - ts[lo]) / (ts[hi] - ts[lo]);
    std::array::from_fn(|j| values[lo][j] + (values[hi][j] - values[lo][j]) * w)
}

/// Full replay of one signature: returns ground-truth joint features aligned
/// with the signature's samples (source = simulated).
pub fn replay(
    chain: &KinematicChain,
    signature: &SignatureTrajectory,
    placement: &WorkspacePlacement,
) -> Result<JointFeatureSeries> {
    replay_at_rate(chain, signature, placement, DEFAULT_CONTROL_RATE)
}

pub fn replay_at_rate(
    chain: &KinematicChain,
    signature: &SignatureTrajectory,
    placement: &WorkspacePlacement,
    control_rate: f64,
) -> Result<JointFeatureSeries> {
    let waypoints = map_to_workspace(signature, placement)?;
    let mut states = plan_joint_trajectory(chain, &waypoints, placement, control_rate)?;

    // Inverse dynamics per tick, then through the motor current and back:
    // the torque that a current-based measurement would report.
    for state in states.iter_mut() {
        let tau = crate::robot::inverse_dynamics(chain, &state.theta, &state.omega, &state.accel);
        state.current = current_from_torque(chain, &tau)?;
        state.tau = torque_from_current(chain, &state.current);
    }

    let tick_t: Vec<f64> = states.iter().map(|s| s.t).collect();
    let theta_ticks: Vec<[f64; N_JOINTS]> = states.iter().map(|s| s.theta).collect();
    let omega_ticks: Vec<[f64; N_JOINTS]> = states.iter().map(|s| s.omega).collect();
    let tau_ticks: Vec<[f64; N_JOINTS]> = states.iter().map(|s| s.tau).collect();

    let t: Vec<f64> = signature.samples.iter().map(|s| s.t).collect();
    let series = JointFeatureSeries {
        theta: t
            .iter()
            .map(|&ti| lerp_channel(&tick_t, &theta_ticks, ti))
            .collect(),
        omega: t
            .iter()
            .map(|&ti| lerp_channel(&tick_t, &omega_ticks, ti))
            .collect(),
        tau: t
            .iter()
            .map(|&ti| lerp_channel(&tick_t, &tau_ticks, ti))
            .collect(),
        t,
        source: FeatureSource::Simulated,
        user_id: signature.user_id.clone(),
        label: signature.label,
        session: signature.session,
    };
    series.validate()?;
    Ok(series)
}

/// Writes a feature series as plain text: header, meta line, then
/// `t th1..th6 om1..om6 ta1..ta6` per row.
pub fn write_feature_file(series: &JointFeatureSeries) -> Result<Vec<u8>> {
    series.validate()?;
    let mut out = String::new();
    out.push_str(
        "#cols: t th1 th2 th3 th4 th5 th6 om1 om2 om3 om4 om5 om6 ta1 ta2 ta3 ta4 ta5 ta6\n",
    );
    let _ = writeln!(
        out,
        "#meta: user={} label={} session={} source={}",
        series.user_id,
        series.label.as_str(),
        series.session,
        series.source.as_str()
    );
    for i in 0..series.len() {
        let _ = write!(out, "{}", series.t[i]);
        for group in [&series.theta, &series.omega, &series.tau] {
            for v in group[i] {
                let _ = write!(out, " {v}");
            }
        }
        out.push('\n');
    }
    Ok(out.into_bytes())
}

pub fn parse_feature_file(bytes: &[u8]) -> Result<JointFeatureSeries> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: e.valid_up_to() + 1,
        msg: "not valid UTF-8".into(),
    })?;
    let mut user_id = "unknown".to_string();
    let mut label = Label::Genuine;
    let mut session = 1u8;
    let mut source = FeatureSource::Simulated;
    let mut t = Vec::new();
    let mut theta = Vec::new();
    let mut omega = Vec::new();
    let mut tau = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#meta:") {
            for field in rest.split_whitespace() {
                let Some((k, v)) = field.split_once('=') else {
                    continue;
                };
                match k {
                    "user" => user_id = v.to_string(),
                    "label" => {
                        label = Label::parse(v).ok_or_else(|| Error::Parse {
                            line: line_no,
                            msg: format!("unknown label '{v}'"),
                        })?;
                    }
                    "session" => session = v.parse().unwrap_or(1),
                    "source" => {
                        source = FeatureSource::parse(v).ok_or_else(|| Error::Parse {
                            line: line_no,
                            msg: format!("unknown source '{v}'"),
                        })?;
                    }
                    _ => {}
                }
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: line_no,
                msg: "non-numeric field".into(),
            })?;
        if fields.len() != 1 + 3 * N_JOINTS {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} fields, got {}", 1 + 3 * N_JOINTS, fields.len()),
            });
        }
        t.push(fields[0]);
        theta.push(std::array::from_fn(|j| fields[1 + j]));
        omega.push(std::array::from_fn(|j| fields[7 + j]));
        tau.push(std::array::from_fn(|j| fields[13 + j]));
    }
    let series = JointFeatureSeries {
        t,
        theta,
        omega,
        tau,
        source,
        user_id,
        label,
        session,
    };
    series.validate()?;
    Ok(series)
}

/// Feature files for a whole corpus, mirroring the corpus layout:
/// `<dir>/<user>/{g|f}_<n>.feat`.
#[derive(Debug, Clone, Default)]
pub struct FeatureSet {
    pub users: BTreeMap<String, UserFeatures>,
}

#[derive(Debug, Clone, Default)]
pub struct UserFeatures {
    pub genuine: Vec<JointFeatureSeries>,
    pub forgeries: Vec<JointFeatureSeries>,
}

pub fn save_feature_set(set: &FeatureSet, dir: &Path) -> Result<()> {
    for (user_id, features) in &set.users {
        let user_dir = dir.join(user_id);
        std::fs::create_dir_all(&user_dir).map_err(|e| Error::io(&user_dir, e))?;
        for (kind, list) in [("g", &features.genuine), ("f", &features.forgeries)] {
            for (n, series) in list.iter().enumerate() {
                let path = user_dir.join(format!("{kind}_{:02}.feat", n + 1));
                std::fs::write(&path, write_feature_file(series)?)
                    .map_err(|e| Error::io(&path, e))?;
            }
        }
    }
    Ok(())
}

pub fn load_feature_set(dir: &Path) -> Result<FeatureSet> {
    let mut set = FeatureSet::default();
    let mut user_dirs: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    user_dirs.sort();
    for user_dir in user_dirs {
        let user_id = user_dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Validation(format!("bad user directory {user_dir:?}")))?
            .to_string();
        let mut files: Vec<_> = std::fs::read_dir(&user_dir)
            .map_err(|e| Error::io(&user_dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "feat"))
            .collect();
        files.sort();
        let mut features = UserFeatures::default();
        for path in files {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let mut series = parse_feature_file(&bytes)?;
            series.user_id = user_id.clone();
            if name.starts_with("g_") {
                series.label = Label::Genuine;
                features.genuine.push(series);
            } else if name.starts_with("f_") {
                series.label = Label::SkilledForgery;
                features.forgeries.push(series);
            } else {
                return Err(Error::Validation(format!(
                    "feature file name '{name}' must start with g_ or f_"
                )));
            }
        }
        if !features.genuine.is_empty() || !features.forgeries.is_empty() {
            set.users.insert(user_id, features);
        }
    }
    Ok(set)
}
