//! Inverse dynamics (recursive Newton-Euler) and the motor torque/current
//! relation.

use nalgebra::Vector3;

use super::{KinematicChain, N_JOINTS, link_transforms};
use crate::error::{Error, Result};

/// Joint torques realizing the profile (theta, omega, accel) under gravity
/// along -z of the base frame. Recursive Newton-Euler, carried out in the
/// base frame; gravity enters as an upward base acceleration, the standard
/// equivalent formulation. Joint i rotates about z_{i-1} of the standard
/// D-H frames.
pub fn inverse_dynamics(
    chain: &KinematicChain,
    theta: &[f64; N_JOINTS],
    omega: &[f64; N_JOINTS],
    accel: &[f64; N_JOINTS],
) -> [f64; N_JOINTS] {
    let frames = link_transforms(chain, theta);
    let origin = |i: usize| frames[i].fixed_view::<3, 1>(0, 3).into_owned();
    let rotation = |i: usize| frames[i].fixed_view::<3, 3>(0, 0).into_owned();
    let joint_axis = |i: usize| frames[i].fixed_view::<3, 1>(0, 2).into_owned();

    // Outward pass: link angular velocity/acceleration and COM acceleration.
    let mut w = Vector3::zeros();
    let mut wd = Vector3::zeros();
    let mut a_origin = Vector3::z() * chain.gravity();
    let mut com = [Vector3::zeros(); N_JOINTS];
    let mut net_force = [Vector3::zeros(); N_JOINTS];
    let mut net_moment = [Vector3::zeros(); N_JOINTS];
    for i in 0..N_JOINTS {
        let axis = joint_axis(i);
        let new_w = w + axis * omega[i];
        let new_wd = wd + axis * accel[i] + w.cross(&(axis * omega[i]));
        let step = origin(i + 1) - origin(i);
        let new_a = a_origin + new_wd.cross(&step) + new_w.cross(&new_w.cross(&step));

        let r = rotation(i + 1);
        let pc = r * chain.coms()[i];
        com[i] = origin(i + 1) + pc;
        let a_com = new_a + new_wd.cross(&pc) + new_w.cross(&new_w.cross(&pc));
        let inertia_world = r * chain.inertias()[i] * r.transpose();
        net_force[i] = a_com * chain.masses()[i];
        net_moment[i] = inertia_world * new_wd + new_w.cross(&(inertia_world * new_w));
        w = new_w;
        wd = new_wd;
        a_origin = new_a;
    }

    // Inward pass: f_i / n_i are the force and couple exerted on link i by
    // link i-1; moments are balanced about each link's COM.
    let mut tau = [0.0; N_JOINTS];
    let mut f_child = Vector3::zeros();
    let mut n_child = Vector3::zeros();
    for i in (0..N_JOINTS).rev() {
        let f = f_child + net_force[i];
        let n = net_moment[i] + n_child + (origin(i + 1) - com[i]).cross(&f_child)
            - (origin(i) - com[i]).cross(&f);
        tau[i] = n.dot(&joint_axis(i));
        f_child = f;
        n_child = n;
    }
    tau
}

/// Joint torque from motor current: `tau_i = r_i * K_l_i * I_i`.
pub fn torque_from_current(chain: &KinematicChain, current: &[f64; N_JOINTS]) -> [f64; N_JOINTS] {
    std::array::from_fn(|i| chain.gear_ratios()[i] * chain.torque_constants()[i] * current[i])
}

/// Exact inverse of [`torque_from_current`]. Errors when any joint's
/// combined coefficient is zero.
pub fn current_from_torque(
    chain: &KinematicChain,
    tau: &[f64; N_JOINTS],
) -> Result<[f64; N_JOINTS]> {
    let mut out = [0.0; N_JOINTS];
    for i in 0..N_JOINTS {
        let k = chain.gear_ratios()[i] * chain.torque_constants()[i];
        if k == 0.0 {
            return Err(Error::Config(format!(
                "joint {}: gear ratio times torque constant is zero",
                i + 1
            )));
        }
        out[i] = tau[i] / k;
    }
    Ok(out)
}
