//! The `simulate` command: independent sample paths, exported trajectories
//! and empirical summaries.
//!
//! Path `i` always draws from stream `(seed, i)` and batches are written in
//! path order, so the output files do not depend on the thread count.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use merlang_core::sim::{
    estimate_state_pmf, extract_busy_periods, simulate_path, write_csv_rows, write_journal, BusySample,
    EmpiricalPmf, Trajectory, CSV_HEADER,
};
use merlang_core::sampling::RngStream;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, TrajectoryFormat};
use crate::error::{Context, HarnessError, Result};

/// Paths held in memory at once.
const BATCH: u64 = 8192;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateEstimate {
    pub t: f64,
    pub pmf: EmpiricalPmf,
    pub mean: f64,
    pub mean_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusySummary {
    pub completed: usize,
    pub censored: usize,
    pub mean_completed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub config: ExperimentConfig,
    pub n_paths: u64,
    pub total_jumps: u64,
    pub state_estimates: Vec<StateEstimate>,
    pub busy_periods: BusySummary,
    pub files: Vec<PathBuf>,
}

struct Accumulator {
    pmfs: Vec<EmpiricalPmf>,
    sums: Vec<(f64, f64)>,
    busy: BusySample,
    jumps: u64,
}

impl Accumulator {
    fn add(&mut self, batch: &[Trajectory], cfg: &ExperimentConfig) -> Result<()> {
        let k = cfg.params.k;
        for (i, &t) in cfg.pmf_times.iter().enumerate() {
            let part = estimate_state_pmf(batch, t, k).context("state estimate")?;
            let acc = &mut self.pmfs[i];
            acc.counts.iter_mut().zip(&part.counts).for_each(|(a, b)| *a += b);
            acc.tail += part.tail;
            acc.n_paths += part.n_paths;
            for p in batch {
                let m = merlang_core::sim::phase_index(p.state_at(t), k) as f64;
                self.sums[i].0 += m;
                self.sums[i].1 += m * m;
            }
        }
        self.busy.merge(extract_busy_periods(batch));
        self.jumps += batch.iter().map(|p| p.jumps.len() as u64).sum::<u64>();
        Ok(())
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<SimulationSummary> {
    cfg.validate()?;
    if let Some(t) = cfg.pmf_times.iter().find(|&&t| t > cfg.grid.t_max) {
        return Err(HarnessError::Config(format!(
            "pmf time {t} lies outside the simulated horizon [0, {}]",
            cfg.grid.t_max
        )));
    }
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut journal = None;
    let mut csv = None;
    for format in &cfg.trajectory_formats {
        match format {
            TrajectoryFormat::Journal if journal.is_none() => {
                let path = dir.join("trajectories.journal");
                journal = Some(BufWriter::new(File::create(&path)?));
                files.push(path);
            }
            TrajectoryFormat::Csv if csv.is_none() => {
                let path = dir.join("trajectories.csv");
                let mut w = BufWriter::new(File::create(&path)?);
                writeln!(w, "{CSV_HEADER}")?;
                csv = Some(w);
                files.push(path);
            }
            _ => {}
        }
    }

    let k = cfg.params.k;
    let empty_pmf = |t| EmpiricalPmf { t, k, counts: Vec::new(), tail: 0, n_paths: 0 };
    let mut acc = Accumulator {
        pmfs: cfg.pmf_times.iter().map(|&t| empty_pmf(t)).collect(),
        sums: vec![(0.0, 0.0); cfg.pmf_times.len()],
        busy: BusySample::default(),
        jumps: 0,
    };
    let mut start = 0;
    while start < cfg.n_paths {
        let end = (start + BATCH).min(cfg.n_paths);
        let batch: Vec<Trajectory> = (start..end)
            .into_par_iter()
            .map(|id| simulate_path(&cfg.params, cfg.grid.t_max, RngStream::new(cfg.seed, id)))
            .collect::<merlang_core::Result<_>>()
            .context("simulation")?;
        if start == 0 {
            for pmf in &mut acc.pmfs {
                pmf.counts = vec![0; estimate_state_pmf(&batch, pmf.t, k).context("state estimate")?.counts.len()];
            }
        }
        acc.add(&batch, cfg)?;
        if let Some(w) = journal.as_mut() {
            write_journal(&batch, &mut *w)?;
        }
        if let Some(w) = csv.as_mut() {
            write_csv_rows(&batch, k, &mut *w)?;
        }
        start = end;
    }
    for w in journal.iter_mut().chain(csv.iter_mut()) {
        w.flush()?;
    }

    let n = cfg.n_paths as f64;
    let state_estimates = acc
        .pmfs
        .into_iter()
        .zip(acc.sums)
        .map(|(pmf, (sum, sq))| {
            let mean = sum / n;
            let var = if n > 1.0 { ((sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
            StateEstimate { t: pmf.t, pmf, mean, mean_std_error: (var / n).sqrt() }
        })
        .collect();
    let completed = &acc.busy.completed;
    let busy_periods = BusySummary {
        completed: completed.len(),
        censored: acc.busy.censored.len(),
        mean_completed: (!completed.is_empty()).then(|| completed.iter().sum::<f64>() / completed.len() as f64),
    };
    let summary_path = dir.join("simulation.json");
    files.push(summary_path.clone());
    let summary = SimulationSummary {
        config: cfg.clone(),
        n_paths: cfg.n_paths,
        total_jumps: acc.jumps,
        state_estimates,
        busy_periods,
        files,
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary is serialisable");
    text.push('\n');
    std::fs::write(&summary_path, text)?;
    Ok(summary)
}
