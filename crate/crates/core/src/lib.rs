//! Kinematic and dynamic signature features from a simulated 6-DOF arm.
//!
//! The crate covers the full pipeline: signature corpora (file I/O plus a
//! seeded synthetic generator), a Denavit-Hartenberg arm model with numerical
//! IK and inverse dynamics, replay of signatures into per-sample joint
//! features, a small MLP that estimates the same features straight from pen
//! trajectories, and a DTW-based verifier with EER/DET evaluation.
//!
//! Everything downstream of a seed is deterministic: the same configuration
//! reproduces every artifact byte for byte.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod plot;
pub mod replay;
pub mod rng;
pub mod robot;
pub mod signature;
pub mod spline;
pub mod synth;
pub mod verifier;

pub use error::{Error, Result};
