use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input value is outside the accepted range.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A computation would exceed a configured size or norm ceiling.
    #[error("resource limit exceeded: {what} (limit {limit})")]
    ResourceLimit { what: String, limit: u64 },

    #[error("no factor space registered for index {0}")]
    MissingFactor(usize),

    #[error("group action failed at point {index}: {reason}")]
    Action { index: usize, reason: String },

    #[error("series diverges: {0}")]
    Divergent(String),

    /// Internal consistency check failed; indicates a bug.
    #[error("internal assertion failed: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed cache file {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::MissingFactor(_) | Error::Divergent(_) => 1,
            Error::ResourceLimit { .. } => 2,
            Error::Action { .. } | Error::Internal(_) => 3,
            Error::Io { .. } | Error::Cache { .. } | Error::Json(_) | Error::Csv(_) => 3,
        }
    }
}
