use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Core(#[from] vfdm_core::VfdmError),

    #[error(transparent)]
    Nn(#[from] vfdm_nn::NnError),
}

pub type Result<T, E = DiffError> = std::result::Result<T, E>;
