//! The validation report: a JSON document with the outcome of every check
//! and enough context to reproduce it.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::validate::{run_check, CheckName, CheckOutcome};

/// Where and with what the report was produced. Wall-clock times are left
/// out so that reruns with the same seed produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub package: String,
    pub version: String,
    pub os: String,
    pub arch: String,
}

impl Fingerprint {
    pub fn current() -> Fingerprint {
        Fingerprint {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub fingerprint: Fingerprint,
    pub config: ExperimentConfig,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

/// Overall verdict, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    Passed,
    Failed,
    OracleFailure,
}

impl ValidationReport {
    /// Runs the checks named in the config, or the full suite if none are.
    pub fn run(cfg: &ExperimentConfig) -> Result<ValidationReport> {
        cfg.validate()?;
        let names: Vec<CheckName> = if cfg.checks.is_empty() { CheckName::SUITE.to_vec() } else { cfg.checks.clone() };
        let checks = names.par_iter().map(|&n| run_check(n, cfg)).collect::<Result<Vec<_>>>()?;
        let passed = checks.iter().all(|c| c.passed);
        Ok(ValidationReport { fingerprint: Fingerprint::current(), config: cfg.clone(), checks, passed })
    }

    pub fn verdict(&self) -> Verdict {
        if self.checks.iter().any(|c| c.oracle_error.is_some()) {
            Verdict::OracleFailure
        } else if self.passed {
            Verdict::Passed
        } else {
            Verdict::Failed
        }
    }

    pub fn check(&self, name: CheckName) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Writes `validation.json` into `dir` and returns its path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("validation.json");
        let mut text = serde_json::to_string_pretty(self).expect("report is serialisable");
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    /// One line per comparison, then one verdict line per check.
    pub fn summarize<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for c in &self.checks {
            for cmp in &c.comparisons {
                writeln!(
                    w,
                    "  {:<22} {:<52} deviation {:<11.3e} tolerance {:<9.1e} {}",
                    c.name.as_str(),
                    cmp.quantity,
                    cmp.max_deviation,
                    cmp.tolerance,
                    if cmp.passed { "ok" } else { "FAIL" }
                )?;
            }
            if let Some(e) = &c.oracle_error {
                writeln!(w, "  {:<22} {e}", c.name.as_str())?;
            }
        }
        for c in &self.checks {
            writeln!(w, "{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::Comparison;

    fn outcome(passed: bool, oracle_error: Option<&str>) -> CheckOutcome {
        CheckOutcome {
            name: CheckName::GoverningSystem,
            passed,
            comparisons: Vec::<Comparison>::new(),
            oracle_error: oracle_error.map(String::from),
        }
    }

    fn report(checks: Vec<CheckOutcome>) -> ValidationReport {
        let passed = checks.iter().all(|c| c.passed);
        ValidationReport { fingerprint: Fingerprint::current(), config: ExperimentConfig::default(), checks, passed }
    }

    #[test]
    fn verdict_follows_the_worst_check() {
        assert_eq!(report(vec![outcome(true, None)]).verdict(), Verdict::Passed);
        assert_eq!(report(vec![outcome(true, None), outcome(false, None)]).verdict(), Verdict::Failed);
        assert_eq!(report(vec![outcome(false, None), outcome(false, Some("diverged"))]).verdict(), Verdict::OracleFailure);
    }
}
