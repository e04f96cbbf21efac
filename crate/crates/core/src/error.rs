use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Numerical outcomes (a failed or inconclusive certificate) are not errors;
/// they are reported through [`crate::report::CertificateReport`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver failure: {message} (iterate: {iterate:?})")]
    Solver { message: String, iterate: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
