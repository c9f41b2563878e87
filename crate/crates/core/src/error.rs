use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: bad format: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: truncated payload at byte offset {offset} (expected {expected} bytes, found {found})")]
    Truncated { path: PathBuf, offset: u64, expected: u64, found: u64 },

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("NaN loss at update {update} (batch {batch})")]
    NanLoss { update: usize, batch: usize },

    #[error("gradient check rejected: {0}")]
    GradCheck(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), msg: msg.into() }
    }

    /// True for failures of the numerical kind (diverged training, NaN inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NanLoss { .. } | Error::NonFinite(_))
    }
}
