use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; `line` is 1-based and counts every line,
    /// including headers.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid data: {0}")]
    Validation(String),

    #[error("bad configuration: {0}")]
    Config(String),

    #[error("{what}: expected {expected}, got {got}")]
    Shape {
        what: String,
        expected: String,
        got: String,
    },

    /// IK failed to converge; carries the best residual seen.
    #[error("target unreachable: residual {pos:.3e} m / {rot:.3e} rad after {iters} iterations")]
    Unreachable { pos: f64, rot: f64, iters: usize },

    #[error("planning failed at waypoint {index}: {source}")]
    Planning {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training failed at epoch {epoch}: {msg}")]
    Training { epoch: usize, msg: String },

    #[error("model load: {0}")]
    ModelLoad(String),

    #[error("degenerate reference set: mean pairwise distance is zero")]
    DegenerateReferences,

    #[error("protocol: {0}")]
    Protocol(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
