use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(
        "solver did not converge after {iterations} iterations (max KKT violation {violation:e})"
    )]
    NoConvergence { iterations: usize, violation: f64 },

    #[error("missing artifact {}: {reason}", path.display())]
    MissingArtifact { path: PathBuf, reason: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed artifact {}: {reason}", path.display())]
    Malformed { path: PathBuf, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    MissingArtifact,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Numerical(_) | Error::NoConvergence { .. } => ErrorKind::Numerical,
            Error::MissingArtifact { .. } | Error::Io { .. } | Error::Malformed { .. } => {
                ErrorKind::MissingArtifact
            }
            Error::InvalidParameter(_)
            | Error::DimensionMismatch(_)
            | Error::Json(_)
            | Error::Csv(_) => ErrorKind::Config,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
