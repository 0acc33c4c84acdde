//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the numerical and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates the documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A series could not reach its tolerance before the term cap.
    #[error("series did not converge within {terms} terms (last term magnitude {last_term:e})")]
    NonConvergence { terms: usize, last_term: f64 },

    /// A coefficient left the representable floating-point range.
    #[error("coefficient overflow: {0}")]
    Overflow(String),

    /// An evaluation route cannot deliver the requested accuracy.
    #[error("numerical breakdown: {0}")]
    Numerical(String),

    /// A simulated path exceeded the event cap before reaching its horizon.
    #[error("runaway path: more than {events} events before t = {horizon}")]
    Runaway { events: u64, horizon: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
