//! Experiment configuration.
//!
//! A run is described by one JSON document whose fields all have defaults,
//! so `{}` is the baseline experiment. Command-line flags are applied
//! on top of the file: built-in defaults < config file < flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use merlang_core::analytic::{TimeGrid, TruncationPolicy};
use merlang_core::coeffs::QueueParams;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::validate::CheckName;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: QueueParams,
    pub grid: TimeGrid,
    pub truncation: TruncationPolicy,
    pub n_paths: u64,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Curves written by `compute`.
    pub quantities: Vec<Quantity>,
    /// Times at which `simulate` tabulates the empirical state distribution;
    /// they must lie within the simulated horizon `grid.t_max`.
    pub pmf_times: Vec<f64>,
    /// Trajectory formats written by `simulate`.
    pub trajectory_formats: Vec<TrajectoryFormat>,
    /// Checks run by `validate`; empty means all of them.
    pub checks: Vec<CheckName>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params: QueueParams::baseline(),
            grid: TimeGrid::default(),
            truncation: TruncationPolicy::default(),
            n_paths: 100_000,
            seed: 1,
            out_dir: PathBuf::from("out"),
            quantities: vec![Quantity::P0, Quantity::Mean],
            pmf_times: vec![0.5, 1.0, 2.0],
            trajectory_formats: vec![TrajectoryFormat::Journal],
            checks: Vec::new(),
        }
    }
}

/// Values given on the command line; `None` leaves the config untouched.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n_paths: Option<u64>,
    pub t_max: Option<f64>,
    pub grid_points: Option<usize>,
    pub quantities: Vec<Quantity>,
    pub checks: Vec<CheckName>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(dir) = o.out_dir {
            self.out_dir = dir;
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(n) = o.n_paths {
            self.n_paths = n;
        }
        if let Some(t) = o.t_max {
            self.grid.t_max = t;
        }
        if let Some(n) = o.grid_points {
            self.grid.n_points = n;
        }
        if !o.quantities.is_empty() {
            self.quantities = o.quantities;
        }
        if !o.checks.is_empty() {
            self.checks = o.checks;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |e: merlang_core::Error| HarnessError::Config(e.to_string());
        self.params.validate().map_err(bad)?;
        TimeGrid::new(self.grid.t_max, self.grid.n_points).map_err(bad)?;
        self.truncation.validate().map_err(bad)?;
        if self.n_paths == 0 {
            return Err(HarnessError::Config("n_paths must be at least 1".into()));
        }
        if let Some(t) = self.pmf_times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(HarnessError::Config(format!("pmf times must be finite and non-negative, got {t}")));
        }
        for q in &self.quantities {
            if let Quantity::Pns(n, s) = *q {
                if n == 0 || s == 0 || s > self.params.k {
                    return Err(HarnessError::Config(format!("{q} is not a busy state for k = {}", self.params.k)));
                }
            }
        }
        Ok(())
    }
}

/// An analytic curve that `compute` can produce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Quantity {
    P0,
    Pns(u64, u32),
    Mean,
    Busy,
    Service,
    SurvivalArrival,
    SurvivalPhase,
    SurvivalSojourn,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::P0 => f.write_str("p0"),
            Quantity::Pns(n, s) => write!(f, "p_{n}_{s}"),
            Quantity::Mean => f.write_str("mean"),
            Quantity::Busy => f.write_str("busy"),
            Quantity::Service => f.write_str("service"),
            Quantity::SurvivalArrival => f.write_str("survival_arrival"),
            Quantity::SurvivalPhase => f.write_str("survival_phase"),
            Quantity::SurvivalSojourn => f.write_str("survival_sojourn"),
        }
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "p0" => Quantity::P0,
            "mean" => Quantity::Mean,
            "busy" => Quantity::Busy,
            "service" => Quantity::Service,
            "survival_arrival" => Quantity::SurvivalArrival,
            "survival_phase" => Quantity::SurvivalPhase,
            "survival_sojourn" => Quantity::SurvivalSojourn,
            other => {
                let parsed = other.strip_prefix("p_").and_then(|rest| {
                    let (n, s) = rest.split_once('_')?;
                    Some(Quantity::Pns(n.parse().ok()?, s.parse().ok()?))
                });
                parsed.ok_or_else(|| {
                    format!(
                        "unknown quantity {other:?}; expected p0, p_N_S, mean, busy, service, \
                         survival_arrival, survival_phase or survival_sojourn"
                    )
                })?
            }
        })
    }
}

impl TryFrom<String> for Quantity {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Quantity> for String {
    fn from(q: Quantity) -> String {
        q.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryFormat {
    /// Binary little-endian journal.
    Journal,
    Csv,
}
