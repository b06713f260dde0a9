use thiserror::Error;

/// Errors raised by the optimization laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("velocity window is empty")]
    NotReady,

    #[error("noise covariance is identically zero; limiting cosine is 0/0")]
    DegenerateNoise,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(LabError::Dimension { expected, actual })
    }
}
