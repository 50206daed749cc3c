use thiserror::Error;

/// Errors surfaced by tensor arithmetic, training, and persistence.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {context} at flat index {index}")]
    NonFinite { context: String, index: usize },

    #[error("incompatible parameter vectors: {0}")]
    Incompatible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset error: {0}")]
    Data(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the error reports NaN/Inf somewhere in a computation.
    /// Landscape sweeps map these to "diverged" samples instead of aborting.
    pub fn is_non_finite(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}
