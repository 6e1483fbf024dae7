use std::io;

use thiserror::Error;

/// Errors produced by every flashdex component.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A file or stream does not follow its documented layout.
    #[error("format error: {0}")]
    Format(String),

    /// Input is well-formed but violates a data contract (duplicate ids,
    /// missing scores, dimension mismatches, ...).
    #[error("invalid data: {0}")]
    Invalid(String),

    /// An internal invariant did not hold. Always a bug.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
