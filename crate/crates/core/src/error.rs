use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the decomposition engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("unsupported image format in {path}: {reason}")]
    Unsupported { path: PathBuf, reason: String },

    #[error("invalid {format} file: {reason}")]
    Format { format: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("malformed annotation: {0}")]
    Annotation(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
