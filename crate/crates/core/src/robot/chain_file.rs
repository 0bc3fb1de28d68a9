//! Chain-description files: all geometry, dynamic parameters, and motor
//! constants of an arm live in a TOML file, not in code. A file declares its
//! own expected reach; the loader measures the chain and rejects tables that
//! miss it, which catches transcription errors in the D-H rows.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;

use super::{DhLink, KinematicChain, N_JOINTS};
use crate::error::{Error, Result};

/// Bundled description of a UR5e-style arm. Masses and centers of mass
/// follow the manufacturer's published figures; inertias are slender-body
/// estimates. Joint limits default to one full turn either way.
pub const DEFAULT_CHAIN_TOML: &str = include_str!("../../assets/ur_arm.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainFile {
    name: String,
    expected_reach_m: f64,
    reach_tolerance: f64,
    gravity: f64,
    /// Six rows of (a, alpha, d, theta_offset).
    dh: Vec<[f64; 4]>,
    joint_limits_lower: Vec<f64>,
    joint_limits_upper: Vec<f64>,
    masses: Vec<f64>,
    coms: Vec<[f64; 3]>,
    /// Six rows of (ixx, iyy, izz, ixy, ixz, iyz) about the COM, link frame.
    inertias: Vec<[f64; 6]>,
    gear_ratios: Vec<f64>,
    torque_constants: Vec<f64>,
}

fn take6<T: Copy>(what: &str, v: &[T]) -> Result<[T; 6]> {
    v.try_into().map_err(|_| Error::Shape {
        what: what.into(),
        expected: "6 entries".into(),
        got: format!("{}", v.len()),
    })
}

pub fn parse_chain_toml(text: &str) -> Result<KinematicChain> {
    let file: ChainFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("chain file: {e}")))?;

    let dh = take6("dh table", &file.dh)?;
    let links: [DhLink; N_JOINTS] = dh.map(|[a, alpha, d, theta_offset]| DhLink {
        a,
        alpha,
        d,
        theta_offset,
    });
    let lower = take6("joint_limits_lower", &file.joint_limits_lower)?;
    let upper = take6("joint_limits_upper", &file.joint_limits_upper)?;
    let limits: [(f64, f64); N_JOINTS] = std::array::from_fn(|i| (lower[i], upper[i]));
    let masses = take6("masses", &file.masses)?;
    let coms = take6("coms", &file.coms)?.map(|[x, y, z]| Vector3::new(x, y, z));
    let inertias = take6("inertias", &file.inertias)?.map(|[ixx, iyy, izz, ixy, ixz, iyz]| {
        Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz)
    });
    let gear_ratios = take6("gear_ratios", &file.gear_ratios)?;
    let torque_constants = take6("torque_constants", &file.torque_constants)?;

    let chain = KinematicChain::new(
        file.name,
        links,
        limits,
        masses,
        coms,
        inertias,
        gear_ratios,
        torque_constants,
        file.gravity,
    )?;

    if !(file.expected_reach_m.is_finite() && file.expected_reach_m > 0.0) {
        return Err(Error::Config("expected_reach_m must be positive".into()));
    }
    let reach = chain.max_horizontal_reach();
    let rel = (reach - file.expected_reach_m).abs() / file.expected_reach_m;
    if rel > file.reach_tolerance {
        return Err(Error::Validation(format!(
            "chain reach check failed: measured {reach:.4} m, declared {:.4} m (tolerance {:.1}%)",
            file.expected_reach_m,
            file.reach_tolerance * 100.0
        )));
    }
    Ok(chain)
}

pub fn load_chain_file(path: &Path) -> Result<KinematicChain> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_chain_toml(&text)
}

/// The bundled UR5e-style chain. Panics only if the bundled asset itself is
/// broken, which the test suite rules out.
pub fn default_chain() -> KinematicChain {
    parse_chain_toml(DEFAULT_CHAIN_TOML).expect("bundled chain description is valid")
}
