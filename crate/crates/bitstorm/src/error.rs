use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {0}")]
    NonFinite(f64),

    #[error("invalid fraction width {0}: must be one of 2, 4, 8, 16, 32")]
    InvalidWidth(u32),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("select index {sel} out of range for {n} mux inputs")]
    SelectOutOfRange { sel: u32, n: u32 },

    #[error("malformed container: {0}")]
    Format(String),

    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    PayloadLength { expected: u64, found: u64 },

    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite loss {loss} at training step {step}")]
    NonFiniteLoss { loss: f64, step: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
