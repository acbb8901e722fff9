use thiserror::Error;

/// Errors raised by the geometry, flow and spectral routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NilflowError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("singular exponent: {0}")]
    SingularExponent(String),
}

pub type Result<T> = std::result::Result<T, NilflowError>;

pub(crate) fn invalid(msg: impl Into<String>) -> NilflowError {
    NilflowError::InvalidParameter(msg.into())
}

pub(crate) fn degenerate(msg: impl Into<String>) -> NilflowError {
    NilflowError::DegenerateMetric(msg.into())
}
