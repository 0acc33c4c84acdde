//! Transient analysis and simulation of the Erlang queue whose clock is
//! replaced by the inverse of a mixture of two independent stable
//! subordinators.

pub mod analytic;
pub mod coeffs;
mod contour;
pub mod error;
pub mod laplace;
pub mod sampling;
pub mod sim;
pub mod specfun;

pub use contour::LogScaled;
pub use error::{Error, Result};
