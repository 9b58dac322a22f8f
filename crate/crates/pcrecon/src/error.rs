//! Crate-wide error type.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("mesh has no usable faces")]
    EmptyMesh,

    #[error("degenerate face {face}: {msg}")]
    DegenerateFace { face: usize, msg: String },

    #[error("degenerate cloud: all points coincide with the chosen center")]
    DegenerateCloud,

    #[error("invalid pose: {msg}")]
    InvalidPose { msg: String },

    #[error("tau must be positive, got {tau}")]
    NonPositiveTau { tau: f64 },

    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: String,
        expected: String,
        got: String,
    },

    #[error("{n} is not a perfect square")]
    NotPerfectSquare { n: usize },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: String },

    #[error("training diverged at step {step}: {msg}")]
    DivergedLoss { step: u64, msg: String },

    #[error("sample {id} present in only one of the compared directories")]
    MissingPair { id: String },

    #[error("invalid configuration: {msg}")]
    Config { msg: String },
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn shape(op: &str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op: op.to_string(),
            expected: expected.into(),
            got: got.into(),
        }
    }
}
