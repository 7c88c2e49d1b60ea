use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Points or matrices whose shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numeric argument outside its valid domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An operation called with inputs it does not accept (wrong arity,
    /// mismatched homology dimensions, unequal measure sizes, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A trace, manifest or diagram file that exists but cannot be used.
    #[error("{}: {message}", path.display())]
    Ingestion { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn ingestion(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Ingestion {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_param(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Parameter(msg()))
    }
}
