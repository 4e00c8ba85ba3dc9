use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VfdmError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("integrity error in {shard}: {reason}")]
    Integrity { shard: String, reason: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

impl VfdmError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VfdmError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = VfdmError> = std::result::Result<T, E>;
