//! The `compute` command: analytic curves on the configured time grid.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use merlang_core::analytic::{
    busy_period_cdf, mean_length_curve, p0_curve, pns_curve, service_density, survival_event_time, Curve,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Quantity};
use crate::error::{Context, Result};

pub fn curve(quantity: Quantity, cfg: &ExperimentConfig) -> Result<Curve> {
    let (q, grid, pol) = (&cfg.params, &cfg.grid, &cfg.truncation);
    let name = quantity.to_string();
    let curve = match quantity {
        Quantity::P0 => p0_curve(q, grid, pol),
        Quantity::Pns(n, s) => pns_curve(n, s, q, grid, pol),
        Quantity::Mean => mean_length_curve(q, grid, pol),
        Quantity::Busy => busy_period_cdf(q, grid, pol),
        Quantity::Service => service_density(q, grid, pol),
        Quantity::SurvivalArrival => survival_event_time(q.lambda, q, grid, pol),
        Quantity::SurvivalPhase => survival_event_time(q.phase_rate(), q, grid, pol),
        Quantity::SurvivalSojourn => survival_event_time(q.lambda + q.phase_rate(), q, grid, pol),
    };
    let mut curve = curve.context(&name)?;
    curve.name = name;
    Ok(curve)
}

/// Writes `<quantity>.csv` and `<quantity>.json` for each configured
/// quantity and returns the paths written. An empty list writes nothing.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let curves = cfg.quantities.par_iter().map(|&q| curve(q, cfg)).collect::<Result<Vec<_>>>()?;
    if curves.is_empty() {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut written = Vec::new();
    for c in &curves {
        let csv = cfg.out_dir.join(format!("{}.csv", c.name));
        c.write_csv(BufWriter::new(File::create(&csv)?))?;
        let json = cfg.out_dir.join(format!("{}.json", c.name));
        let mut text = serde_json::to_string_pretty(&c.to_json()).expect("curve is serialisable");
        text.push('\n');
        std::fs::write(&json, text)?;
        written.extend([csv, json]);
    }
    Ok(written)
}
