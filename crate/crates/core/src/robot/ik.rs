//! Numerical inverse kinematics: damped least squares on the geometric
//! Jacobian. Solutions stay on the branch continuous with the seed — no
//! angle wrapping is applied, which keeps replayed joint trajectories free
//! of 2-pi jumps.

use nalgebra::{Matrix6, Vector3, Vector6};

use super::{KinematicChain, N_JOINTS, Pose, forward_kinematics, geometric_jacobian, pose_error};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct IkSettings {
    pub damping: f64,
    pub max_iterations: usize,
    /// Per-joint step clamp in radians.
    pub step_clamp: f64,
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
    /// Deterministic retries from perturbed seeds when the seeded run lands
    /// in a local minimum. The caller's seed always gets the first attempt,
    /// so solutions stay branch-continuous whenever that branch converges.
    pub restarts: usize,
}

impl Default for IkSettings {
    fn default() -> Self {
        IkSettings {
            damping: 1e-3,
            max_iterations: 200,
            step_clamp: 0.2,
            position_tolerance: 1e-5,
            orientation_tolerance: 1e-4,
            restarts: 8,
        }
    }
}

fn clamp_step(step: &mut Vector6<f64>, limit: f64) {
    let max = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > limit {
        *step *= limit / max;
    }
}

fn damped_solve(jac: &Matrix6<f64>, err: &Vector6<f64>, damping: f64) -> Vector6<f64> {
    // J^T (J J^T + lambda^2 I)^-1 e
    let jjt = jac * jac.transpose() + Matrix6::identity() * damping * damping;
    match jjt.lu().solve(err) {
        Some(y) => jac.transpose() * y,
        None => Vector6::zeros(),
    }
}

/// Solves for all six joints so the end-effector reaches `target`.
///
/// Returns the converged angles or [`Error::Unreachable`] carrying the best
/// residual. Converged solutions outside the joint limits are shifted by
/// whole turns where that brings them inside (a whole turn leaves the pose
/// unchanged).
pub fn solve_ik(
    chain: &KinematicChain,
    target: &Pose,
    seed: &[f64; N_JOINTS],
    settings: &IkSettings,
) -> Result<[f64; N_JOINTS]> {
    let mut attempt_seed = *seed;
    let mut restart_rng = crate::rng::Rng::new(0x6B69_6E65); // fixed stream, fully deterministic
    let mut first_err = None;
    for attempt in 0..=settings.restarts {
        match solve_ik_once(chain, target, &attempt_seed, settings) {
            Ok(theta) => return Ok(theta),
            Err(e) => {
                if attempt == 0 {
                    first_err = Some(e);
                }
            }
        }
        // Next attempt: perturb the caller's seed.
        attempt_seed = *seed;
        for q in attempt_seed.iter_mut() {
            *q += restart_rng.uniform(-1.5, 1.5);
        }
    }
    Err(first_err.expect("at least one attempt ran"))
}

fn solve_ik_once(
    chain: &KinematicChain,
    target: &Pose,
    seed: &[f64; N_JOINTS],
    settings: &IkSettings,
) -> Result<[f64; N_JOINTS]> {
    let mut theta = *seed;
    let mut best = (f64::INFINITY, f64::INFINITY);
    let mut err = pose_error(target, &forward_kinematics(chain, &theta));
    for _ in 0..settings.max_iterations {
        let pos_err = err.fixed_rows::<3>(0).norm();
        let rot_err = err.fixed_rows::<3>(3).norm();
        if pos_err + rot_err < best.0 + best.1 {
            best = (pos_err, rot_err);
        }
        if pos_err <= settings.position_tolerance && rot_err <= settings.orientation_tolerance {
            return finish(chain, theta, settings.max_iterations);
        }
        let jac = geometric_jacobian(chain, &theta);
        let mut step = damped_solve(&jac, &err, settings.damping);
        clamp_step(&mut step, settings.step_clamp);
        // Backtrack when the full step overshoots; the DLS direction is a
        // descent direction for the squared error, so some fraction of it
        // reduces the residual.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..6 {
            let mut trial = theta;
            for i in 0..N_JOINTS {
                trial[i] += step[i] * scale;
            }
            let trial_err = pose_error(target, &forward_kinematics(chain, &trial));
            if trial_err.norm() < err.norm() {
                theta = trial;
                err = trial_err;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // Stationary for this damping; take the smallest step anyway to
            // escape shallow plateaus.
            for i in 0..N_JOINTS {
                theta[i] += step[i] * scale;
            }
            err = pose_error(target, &forward_kinematics(chain, &theta));
        }
    }
    Err(Error::Unreachable {
        pos: best.0,
        rot: best.1,
        iters: settings.max_iterations,
    })
}

/// Solves position plus tool-axis direction, holding joint 6 fixed at its
/// seed value. The tool z-axis does not depend on the rotation about itself,
/// so freezing the last joint leaves the axis constraint solvable by the
/// first five joints; the frozen joint makes its velocity identically
/// constant along planned trajectories.
pub fn solve_ik_pen_axis(
    chain: &KinematicChain,
    target_position: &Vector3<f64>,
    target_axis: &Vector3<f64>,
    seed: &[f64; N_JOINTS],
    settings: &IkSettings,
) -> Result<[f64; N_JOINTS]> {
    let axis = target_axis.normalize();
    let mut theta = *seed;
    let mut best = (f64::INFINITY, f64::INFINITY);
    for _ in 0..settings.max_iterations {
        let current = forward_kinematics(chain, &theta);
        let dp = target_position - current.position();
        let z = current.z_axis();
        // Angular correction that rotates the current tool axis onto the
        // target axis; magnitude equals the misalignment angle.
        let cross = z.cross(&axis);
        let angle = cross.norm().atan2(z.dot(&axis));
        let axis_err = if cross.norm() > 1e-12 {
            cross.normalize() * angle
        } else if angle.abs() < 1e-12 {
            Vector3::zeros()
        } else {
            // Anti-parallel: rotate about any perpendicular of z.
            let mut perp = z.cross(&Vector3::x());
            if perp.norm() < 1e-6 {
                perp = z.cross(&Vector3::y());
            }
            perp.normalize() * angle
        };
        let pos_err = dp.norm();
        if pos_err + angle.abs() < best.0 + best.1 {
            best = (pos_err, angle.abs());
        }
        if pos_err <= settings.position_tolerance && angle.abs() <= settings.orientation_tolerance {
            return finish(chain, theta, settings.max_iterations);
        }
        let err = Vector6::new(dp.x, dp.y, dp.z, axis_err.x, axis_err.y, axis_err.z);
        let mut jac = geometric_jacobian(chain, &theta);
        // Freeze joint 6.
        for r in 0..6 {
            jac[(r, 5)] = 0.0;
        }
        let mut step = damped_solve(&jac, &err, settings.damping);
        step[5] = 0.0;
        clamp_step(&mut step, settings.step_clamp);
        for i in 0..N_JOINTS {
            theta[i] += step[i];
        }
    }
    Err(Error::Unreachable {
        pos: best.0,
        rot: best.1,
        iters: settings.max_iterations,
    })
}

#[allow(clippy::needless_range_loop)]
fn finish(
    chain: &KinematicChain,
    mut theta: [f64; N_JOINTS],
    iters: usize,
) -> Result<[f64; N_JOINTS]> {
    for i in 0..N_JOINTS {
        let (lo, hi) = chain.joint_limits()[i];
        while theta[i] > hi {
            theta[i] -= std::f64::consts::TAU;
        }
        while theta[i] < lo {
            theta[i] += std::f64::consts::TAU;
        }
        if theta[i] > hi {
            return Err(Error::Unreachable {
                pos: 0.0,
                rot: 0.0,
                iters,
            });
        }
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::robot::chain_file::default_chain;

    const MID_POSTURE: [f64; 6] = [0.0, -1.2, 1.6, -1.9, -1.4, 0.3];

    #[test]
    fn fixed_point_when_seeded_at_solution() {
        let chain = default_chain();
        let target = forward_kinematics(&chain, &MID_POSTURE);
        let got = solve_ik(&chain, &target, &MID_POSTURE, &IkSettings::default()).unwrap();
        for i in 0..6 {
            assert!((got[i] - MID_POSTURE[i]).abs() < 1e-9, "joint {i}");
        }
    }

    #[test]
    fn round_trip_on_random_reachable_poses() {
        let chain = default_chain();
        let settings = IkSettings::default();
        let mut rng = Rng::new(31);
        for _ in 0..100 {
            let mut theta = MID_POSTURE;
            for q in theta.iter_mut() {
                *q += rng.uniform(-1.0, 1.0);
            }
            let target = forward_kinematics(&chain, &theta);
            let solved = solve_ik(&chain, &target, &MID_POSTURE, &settings).unwrap();
            let reached = forward_kinematics(&chain, &solved);
            let err = pose_error(&target, &reached);
            assert!(err.fixed_rows::<3>(0).norm() <= 1e-4);
            assert!(err.fixed_rows::<3>(3).norm() <= 1e-4);
        }
    }

    #[test]
    fn far_target_reports_unreachable_with_residual() {
        let chain = default_chain();
        let target = Pose::from_parts(
            forward_kinematics(&chain, &MID_POSTURE).rotation(),
            Vector3::new(2.0, 0.0, 0.0),
        );
        match solve_ik(&chain, &target, &MID_POSTURE, &IkSettings::default()) {
            Err(Error::Unreachable { pos, .. }) => assert!(pos > 0.5),
            other => panic!("expected unreachable, got {other:?}"),
        }
    }

    #[test]
    fn pen_axis_solver_aligns_tool_and_freezes_joint6() {
        let chain = default_chain();
        let settings = IkSettings::default();
        let down = Vector3::new(0.0, 0.0, -1.0);
        let mut rng = Rng::new(37);
        let mut seed = MID_POSTURE;
        for _ in 0..50 {
            let target = Vector3::new(
                rng.uniform(0.32, 0.48),
                rng.uniform(-0.08, 0.08),
                rng.uniform(0.08, 0.14),
            );
            let solved = solve_ik_pen_axis(&chain, &target, &down, &seed, &settings).unwrap();
            assert_eq!(solved[5], seed[5], "joint 6 must stay frozen");
            let pose = forward_kinematics(&chain, &solved);
            assert!((pose.position() - target).norm() <= 1e-4);
            let angle = pose
                .z_axis()
                .cross(&down)
                .norm()
                .atan2(pose.z_axis().dot(&down));
            assert!(angle.abs() <= 1e-4);
            seed = solved;
        }
    }

    #[test]
    fn solution_respects_joint_limits() {
        let chain = default_chain();
        let mut rng = Rng::new(41);
        for _ in 0..50 {
            let mut theta = MID_POSTURE;
            for q in theta.iter_mut() {
                *q += rng.uniform(-0.8, 0.8);
            }
            let target = forward_kinematics(&chain, &theta);
            let solved = solve_ik(&chain, &target, &MID_POSTURE, &IkSettings::default()).unwrap();
            assert!(chain.within_limits(&solved));
        }
    }
}
