use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure categories shared by every module and mapped onto CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },

    #[error("volume is in {found} space, expected {expected}")]
    SpaceMismatch { expected: &'static str, found: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidSpec(String),

    #[error("malformed header {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("data length mismatch in {path}: header promises {expected} bytes, found {found}")]
    LengthMismatch { path: PathBuf, expected: usize, found: usize },

    #[error("non-finite sample at flat index {index}")]
    NonFinite { index: usize },

    #[error("error metric undefined: reference image has zero norm")]
    UndefinedMetric,

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for validation failures, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite { .. } | Error::UndefinedMetric | Error::Calibration(_) => 3,
            Error::Io { .. } | Error::Csv(_) => 1,
            _ => 2,
        }
    }
}
