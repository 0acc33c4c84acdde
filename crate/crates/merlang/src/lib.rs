//! Experiment harness for the mixed time-changed Erlang queue: analytic
//! curves, trajectory simulation and cross-validation between independent
//! numerical routes.

pub mod compute;
pub mod config;
pub mod error;
pub mod oracle;
pub mod report;
pub mod simulate;
pub mod stats;
pub mod validate;

pub use config::{ExperimentConfig, Overrides};
pub use error::{HarnessError, Result};
