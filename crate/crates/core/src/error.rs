use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An operation received arguments that violate its preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Tensor or image shapes do not agree.
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// A dataset directory or file could not be ingested.
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// Run configuration is invalid (bad value, unknown key, inconsistent flags).
    #[error("config error: {0}")]
    Config(String),

    /// A checkpoint could not be written, read, or matched to a model.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training produced a non-finite loss; carries the offending term.
    #[error("non-finite loss in term {term} at step {step}")]
    NonFiniteLoss { term: &'static str, step: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Errors surfaced by image codecs (TIFF/PNG).
    #[error("image codec error: {0}")]
    Codec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
