//! Kinematics and dynamics of a 6-DOF serial arm described by
//! Denavit-Hartenberg parameters.

mod chain_file;
mod dynamics;
mod ik;

pub use chain_file::{DEFAULT_CHAIN_TOML, default_chain, load_chain_file, parse_chain_toml};
pub use dynamics::{current_from_torque, inverse_dynamics, torque_from_current};
pub use ik::{IkSettings, solve_ik, solve_ik_pen_axis};

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};

use crate::error::{Error, Result};

pub const N_JOINTS: usize = 6;

/// One D-H link: translation `a` along x, twist `alpha` about x, offset `d`
/// along z, and a constant joint-angle offset added to the commanded angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhLink {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
}

impl DhLink {
    pub fn is_finite(&self) -> bool {
        self.a.is_finite()
            && self.alpha.is_finite()
            && self.d.is_finite()
            && self.theta_offset.is_finite()
    }
}

/// End-effector pose as a homogeneous transform. The rotation block is kept
/// orthonormal; constructors re-orthonormalize when drift exceeds 1e-9.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose(Matrix4<f64>);

const ORTHO_DRIFT: f64 = 1e-9;

impl Pose {
    pub fn identity() -> Self {
        Pose(Matrix4::identity())
    }

    /// Wraps a homogeneous transform, re-orthonormalizing the rotation block
    /// if accumulated drift exceeds the tolerance.
    pub fn from_matrix(m: Matrix4<f64>) -> Self {
        let mut m = m;
        m.set_row(3, &nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0));
        let r = m.fixed_view::<3, 3>(0, 0).into_owned();
        let drift = (r.transpose() * r - Matrix3::identity()).norm();
        if drift > ORTHO_DRIFT {
            let fixed = orthonormalize(&r);
            m.fixed_view_mut::<3, 3>(0, 0).copy_from(&fixed);
        }
        Pose(m)
    }

    pub fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Pose::from_matrix(m)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn position(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    /// z-axis of the pose frame (tool axis for the end-effector).
    pub fn z_axis(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 2).into_owned()
    }

    pub fn rotation_drift(&self) -> f64 {
        let r = self.rotation();
        (r.transpose() * r - Matrix3::identity()).norm()
    }
}

/// Gram-Schmidt on the columns.
fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let c0 = r.column(0).normalize();
    let mut c1 = r.column(1).into_owned();
    c1 -= c0 * c0.dot(&c1);
    let c1 = c1.normalize();
    let c2 = c0.cross(&c1);
    Matrix3::from_columns(&[c0, c1, c2])
}

/// Full arm description: geometry, per-link dynamic parameters, and the
/// motor-side constants that close the torque/current loop.
#[derive(Debug, Clone)]
pub struct KinematicChain {
    pub name: String,
    links: [DhLink; N_JOINTS],
    joint_limits: [(f64, f64); N_JOINTS],
    masses: [f64; N_JOINTS],
    coms: [Vector3<f64>; N_JOINTS],
    inertias: [Matrix3<f64>; N_JOINTS],
    gear_ratios: [f64; N_JOINTS],
    torque_constants: [f64; N_JOINTS],
    gravity: f64,
}

impl KinematicChain {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        links: [DhLink; N_JOINTS],
        joint_limits: [(f64, f64); N_JOINTS],
        masses: [f64; N_JOINTS],
        coms: [Vector3<f64>; N_JOINTS],
        inertias: [Matrix3<f64>; N_JOINTS],
        gear_ratios: [f64; N_JOINTS],
        torque_constants: [f64; N_JOINTS],
        gravity: f64,
    ) -> Result<Self> {
        for (i, l) in links.iter().enumerate() {
            if !l.is_finite() {
                return Err(Error::Validation(format!(
                    "link {}: non-finite D-H row",
                    i + 1
                )));
            }
        }
        for (i, &(lo, hi)) in joint_limits.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Validation(format!("joint {} limits invalid", i + 1)));
            }
        }
        for i in 0..N_JOINTS {
            if !(masses[i].is_finite() && masses[i] >= 0.0) {
                return Err(Error::Validation(format!("link {} mass invalid", i + 1)));
            }
            if !(coms[i].iter().all(|v| v.is_finite()) && inertias[i].iter().all(|v| v.is_finite()))
            {
                return Err(Error::Validation(format!(
                    "link {} dynamic parameters non-finite",
                    i + 1
                )));
            }
            if !gear_ratios[i].is_finite() || !torque_constants[i].is_finite() {
                return Err(Error::Validation(format!(
                    "joint {} motor constants invalid",
                    i + 1
                )));
            }
        }
        if !(gravity.is_finite() && gravity >= 0.0) {
            return Err(Error::Validation("gravity must be finite and >= 0".into()));
        }
        Ok(KinematicChain {
            name,
            links,
            joint_limits,
            masses,
            coms,
            inertias,
            gear_ratios,
            torque_constants,
            gravity,
        })
    }

    pub fn links(&self) -> &[DhLink; N_JOINTS] {
        &self.links
    }

    pub fn joint_limits(&self) -> &[(f64, f64); N_JOINTS] {
        &self.joint_limits
    }

    pub fn masses(&self) -> &[f64; N_JOINTS] {
        &self.masses
    }

    pub fn coms(&self) -> &[Vector3<f64>; N_JOINTS] {
        &self.coms
    }

    pub fn inertias(&self) -> &[Matrix3<f64>; N_JOINTS] {
        &self.inertias
    }

    pub fn gear_ratios(&self) -> &[f64; N_JOINTS] {
        &self.gear_ratios
    }

    pub fn torque_constants(&self) -> &[f64; N_JOINTS] {
        &self.torque_constants
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn within_limits(&self, theta: &[f64; N_JOINTS]) -> bool {
        theta
            .iter()
            .zip(self.joint_limits.iter())
            .all(|(&q, &(lo, hi))| q >= lo && q <= hi)
    }

    /// Maximum horizontal distance from the base axis to the end frame with
    /// the wrist held at its home position, i.e. the working radius with the
    /// tool inline. Deterministic coarse grid over the two in-plane arm
    /// joints plus golden-section refinement.
    pub fn max_horizontal_reach(&self) -> f64 {
        let planar = |q2: f64, q3: f64| -> f64 {
            let theta = [0.0, q2, q3, 0.0, 0.0, 0.0];
            let p = forward_kinematics(self, &theta).position();
            (p.x * p.x + p.y * p.y).sqrt()
        };
        let n = 181;
        let step = std::f64::consts::TAU / n as f64;
        let mut best = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            for j in 0..n {
                let (q2, q3) = (
                    -std::f64::consts::PI + i as f64 * step,
                    -std::f64::consts::PI + j as f64 * step,
                );
                let r = planar(q2, q3);
                if r > best.0 {
                    best = (r, q2, q3);
                }
            }
        }
        // Local refinement around the grid optimum.
        let (mut q2, mut q3) = (best.1, best.2);
        let mut h = step;
        for _ in 0..40 {
            let mut improved = false;
            for (d2, d3) in [
                (h, 0.0),
                (-h, 0.0),
                (0.0, h),
                (0.0, -h),
                (h, h),
                (-h, -h),
                (h, -h),
                (-h, h),
            ] {
                let r = planar(q2 + d2, q3 + d3);
                if r > best.0 {
                    best.0 = r;
                    q2 += d2;
                    q3 += d3;
                    improved = true;
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        best.0
    }
}

/// Homogeneous transform of one link for joint angle `theta`:
/// `Rot_z(theta) * Transl_z(d) * Transl_x(a) * Rot_x(alpha)`.
pub fn dh_transform(link: &DhLink, theta: f64) -> Pose {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = link.alpha.sin_cos();
    Pose(Matrix4::new(
        ct,
        -st * ca,
        st * sa,
        link.a * ct,
        st,
        ct * ca,
        -ct * sa,
        link.a * st,
        0.0,
        sa,
        ca,
        link.d,
        0.0,
        0.0,
        0.0,
        1.0,
    ))
}

/// Cumulative transforms base -> frame i for i = 0..=6. `out[0]` is the
/// identity, `out[6]` the end-effector pose.
pub fn link_transforms(
    chain: &KinematicChain,
    theta: &[f64; N_JOINTS],
) -> [Matrix4<f64>; N_JOINTS + 1] {
    let mut out = [Matrix4::identity(); N_JOINTS + 1];
    for i in 0..N_JOINTS {
        let t = dh_transform(&chain.links[i], theta[i] + chain.links[i].theta_offset);
        out[i + 1] = out[i] * t.matrix();
    }
    out
}

/// Base-to-end pose: the product of the six link transforms.
pub fn forward_kinematics(chain: &KinematicChain, theta: &[f64; N_JOINTS]) -> Pose {
    Pose::from_matrix(link_transforms(chain, theta)[N_JOINTS])
}

/// Geometric Jacobian of the end frame. Rows 0..3 map joint rates to linear
/// velocity, rows 3..6 to angular velocity; column i is the twist
/// contribution of joint i.
pub fn geometric_jacobian(chain: &KinematicChain, theta: &[f64; N_JOINTS]) -> Matrix6<f64> {
    let frames = link_transforms(chain, theta);
    let p_end = frames[N_JOINTS].fixed_view::<3, 1>(0, 3).into_owned();
    let mut jac = Matrix6::zeros();
    for i in 0..N_JOINTS {
        let z = frames[i].fixed_view::<3, 1>(0, 2).into_owned();
        let p = frames[i].fixed_view::<3, 1>(0, 3).into_owned();
        let lin = z.cross(&(p_end - p));
        for r in 0..3 {
            jac[(r, i)] = lin[r];
            jac[(r + 3, i)] = z[r];
        }
    }
    jac
}

/// Rotation-vector (axis times angle) of a rotation matrix.
pub fn rotation_vector(r: &Matrix3<f64>) -> Vector3<f64> {
    let s = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    ) * 0.5;
    let sin_t = s.norm();
    let cos_t = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let angle = sin_t.atan2(cos_t);
    if sin_t > 1e-12 {
        s * (angle / sin_t)
    } else if cos_t > 0.0 {
        // Near identity: first-order term is exact enough.
        s * 2.0 / (1.0 + cos_t)
    } else {
        // Near pi: extract the axis from the diagonal.
        let d = Vector3::new(r[(0, 0)], r[(1, 1)], r[(2, 2)]);
        let mut axis = Vector3::new(
            ((d.x - cos_t) / (1.0 - cos_t)).max(0.0).sqrt(),
            ((d.y - cos_t) / (1.0 - cos_t)).max(0.0).sqrt(),
            ((d.z - cos_t) / (1.0 - cos_t)).max(0.0).sqrt(),
        );
        if r[(2, 1)] - r[(1, 2)] < 0.0 {
            axis.x = -axis.x;
        }
        if r[(0, 2)] - r[(2, 0)] < 0.0 {
            axis.y = -axis.y;
        }
        if r[(1, 0)] - r[(0, 1)] < 0.0 {
            axis.z = -axis.z;
        }
        if axis.norm() < 1e-12 {
            return Vector3::new(angle, 0.0, 0.0);
        }
        axis.normalize() * angle
    }
}

/// Pose error of `current` relative to `target` as a stacked
/// (translation, rotation-vector) 6-vector.
pub fn pose_error(target: &Pose, current: &Pose) -> Vector6<f64> {
    let dp = target.position() - current.position();
    let dr = rotation_vector(&(target.rotation() * current.rotation().transpose()));
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// Time-stamped joint-space state of the arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub t: f64,
    pub theta: [f64; N_JOINTS],
    pub omega: [f64; N_JOINTS],
    pub accel: [f64; N_JOINTS],
    pub tau: [f64; N_JOINTS],
    pub current: [f64; N_JOINTS],
}

impl JointState {
    pub fn at(t: f64, theta: [f64; N_JOINTS]) -> Self {
        JointState {
            t,
            theta,
            omega: [0.0; N_JOINTS],
            accel: [0.0; N_JOINTS],
            tau: [0.0; N_JOINTS],
            current: [0.0; N_JOINTS],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self
                .theta
                .iter()
                .chain(&self.omega)
                .chain(&self.accel)
                .chain(&self.tau)
                .chain(&self.current)
                .all(|v| v.is_finite())
    }
}
