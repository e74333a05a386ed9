use thiserror::Error;

pub type Result<T> = std::result::Result<T, VortexError>;

#[derive(Debug, Error)]
pub enum VortexError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A trajectory produced a non-finite coordinate.
    #[error("numerical failure in replica {replica} at t = {time}")]
    NumericalFailure { replica: usize, time: f64 },

    /// A sample is too degenerate for the requested estimator.
    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl VortexError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        VortexError::Domain(msg.into())
    }
}
