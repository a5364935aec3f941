use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The instance violates a structural hypothesis (e.g. a transit square with a small average of h).
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    /// A linear program has no finite optimum.
    #[error("unbounded linear program: {0}")]
    Unbounded(String),
    /// Malformed JSON input.
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    /// Filesystem failure with the offending path.
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInstance(msg.into()))
}
