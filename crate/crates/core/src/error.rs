use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the spectral machinery, the checkers and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("lambda = {0} is not in the resolvent set (need lambda > 0)")]
    OutOfResolventSet(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid time: {0}")]
    InvalidTime(String),
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("truncation K = {current} is insufficient, need about K = {required}: {reason}")]
    TruncationInsufficient {
        current: usize,
        required: usize,
        reason: String,
    },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
