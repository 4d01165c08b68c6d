use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid skeleton: {0}")]
    Skeleton(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("channel sets differ: {0}")]
    ChannelMismatch(String),

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}:{line}: {reason}")]
    Record { path: PathBuf, line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn record(path: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        Error::Record {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}
