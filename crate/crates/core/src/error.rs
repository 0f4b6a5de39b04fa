use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse grouping used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad or inconsistent input data.
    Data,
    /// The requested protocol or configuration cannot run on this data.
    Protocol,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Protocol(_) | Error::Config(_) | Error::NonFinite(_) | Error::Argument(_) => {
                ErrorClass::Protocol
            }
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Degenerate(_)
            | Error::UndefinedMetric(_)
            | Error::Shape(_)
            | Error::Io { .. } => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
