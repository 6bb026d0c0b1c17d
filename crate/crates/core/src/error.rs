use thiserror::Error;

/// Errors raised by the certification library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The residual function is not known to have a moderate behavior, so an
    /// error bound cannot be converted into a KL inequality.
    #[error("certificate refused, equivalence may fail: {0}")]
    CertificateRefused(String),

    /// Assumption (A) on the worst-case profile does not hold.
    #[error("assumption (A) violated: {0}")]
    AssumptionViolated(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("serialization failed: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
