use std::path::PathBuf;

use thiserror::Error;
use vfdm_core::VfdmError;
use vfdm_diffusion::DiffError;
use vfdm_nn::NnError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration, 3 for I/O and data integrity, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<VfdmError> for CliError {
    fn from(e: VfdmError) -> Self {
        match e {
            VfdmError::Config(m) => CliError::Config(m),
            VfdmError::Io { path, source } => CliError::Io { path, source },
            VfdmError::Integrity { .. } | VfdmError::Manifest(_) => CliError::Io {
                path: PathBuf::new(),
                source: std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()),
            },
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Io { path, source } => CliError::Io { path, source },
            NnError::Shape(m) => CliError::Config(m),
            NnError::Checkpoint(_) | NnError::Header(_) => CliError::Io {
                path: PathBuf::new(),
                source: std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()),
            },
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<DiffError> for CliError {
    fn from(e: DiffError) -> Self {
        match e {
            DiffError::Config(m) => CliError::Config(m),
            DiffError::Core(e) => e.into(),
            DiffError::Nn(e) => e.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io {
            path: PathBuf::new(),
            source: std::io::Error::other(e.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
