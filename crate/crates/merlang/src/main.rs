use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use merlang::config::{ExperimentConfig, Overrides, Quantity};
use merlang::report::{ValidationReport, Verdict};
use merlang::validate::CheckName;
use merlang::{compute, simulate, HarnessError, Result};

/// Mixed time-changed Erlang queue: analytic curves, simulation and
/// cross-validation.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate analytic curves on the time grid.
    Compute(Common),
    /// Simulate sample paths and export them.
    Simulate(Common),
    /// Run the validation checks and write a report.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment file; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of simulated paths.
    #[arg(long)]
    paths: Option<u64>,
    /// End of the time grid.
    #[arg(long)]
    t_max: Option<f64>,
    /// Number of grid points, including t = 0.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Quantity to compute (repeatable), e.g. p0, p_2_3, mean, busy.
    #[arg(long = "quantity")]
    quantities: Vec<Quantity>,
    /// Check to run (repeatable); all checks when omitted.
    #[arg(long = "check")]
    checks: Vec<CheckName>,
}

impl Common {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(Overrides {
            out_dir: self.out,
            seed: self.seed,
            n_paths: self.paths,
            t_max: self.t_max,
            grid_points: self.grid_points,
            quantities: self.quantities,
            checks: self.checks,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn thread_pool() -> Result<()> {
    let Ok(value) = std::env::var("MERLANG_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| HarnessError::Config(format!("MERLANG_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| HarnessError::Config(format!("cannot build thread pool: {e}")))
}

fn run(cli: Cli) -> Result<ExitCode> {
    thread_pool()?;
    match cli.command {
        Command::Compute(args) => {
            let cfg = args.resolve()?;
            for path in compute::run(&cfg)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate(args) => {
            let cfg = args.resolve()?;
            let summary = simulate::run(&cfg)?;
            for path in &summary.files {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(args) => {
            let cfg = args.resolve()?;
            let report = ValidationReport::run(&cfg)?;
            report.summarize(std::io::stdout().lock())?;
            let path = report.write(&cfg.out_dir)?;
            println!("{}", path.display());
            Ok(match report.verdict() {
                Verdict::Passed => ExitCode::SUCCESS,
                Verdict::Failed => ExitCode::from(1),
                Verdict::OracleFailure => ExitCode::from(3),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    run(cli).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}
