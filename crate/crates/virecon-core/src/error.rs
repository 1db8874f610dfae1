//! Error type shared by all core operations.

use alloc::string::String;
use core::fmt;

/// Failure modes of the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on the arguments was violated.
    InvalidArgument(String),
    /// A non-finite value was produced or encountered.
    NumericError(String),
    /// An iterative solver did not reach its tolerance within the iteration cap.
    ConvergenceFailure { iterations: usize, residual: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NumericError(msg) => write!(f, "numeric error: {msg}"),
            Error::ConvergenceFailure {
                iterations,
                residual,
            } => write!(
                f,
                "solver failed to converge after {iterations} iterations (residual {residual:e})"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::NumericError(msg.into())
}
