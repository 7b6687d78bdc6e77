//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("viewpoint label {label} out of range (n_pixels = {n_pixels})")]
    LabelOutOfRange { label: usize, n_pixels: usize },

    #[error("invalid direction: {0}")]
    InvalidDirection(String),

    #[error("{path}: size mismatch, expected {expected} bytes, found {found}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("unknown phantom kind: {0}")]
    UnknownPhantom(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
