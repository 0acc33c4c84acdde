//! Named validation checks. Each compares two independent routes to the
//! same quantity and records the worst deviation against a tolerance.

use std::fmt;
use std::str::FromStr;

use merlang_core::analytic::{
    mean_length_curve, p0_curve, pns_curve, service_density_at, survival_at, MeanLength, PointValue, StateSeries,
    TimeGrid, TruncationPolicy,
};
use merlang_core::coeffs::QueueParams;
use merlang_core::laplace::{event_survival_c, invert_lt, phi_mix, service_c, LaplaceSeries};
use merlang_core::sampling::{sample_event_time, sample_mixed_subordinator_at, RngStream};
use merlang_core::sim::{
    phase_index, simulate_busy_period, simulate_path, state_from_index, BusySample, QueueState,
};
use merlang_core::specfun::{mittag_leffler3, MLParams};
use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Context, HarnessError, Result};
use crate::oracle::{ErlangChain, SingleOrderRoute};
use crate::stats::{ks_one_sample, ks_two_sample, sort_sample, sup_distance_on_steps};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CheckName {
    SpecialFunctions,
    LtRoundtrip,
    LtRoundtripP0,
    LtRoundtripPns,
    LtRoundtripMean,
    LtRoundtripBusy,
    LtRoundtripSurvival,
    LtRoundtripService,
    GoverningSystem,
    FractionalReduction,
    ClassicalLimit,
    MonteCarlo,
    Samplers,
    BusyPeriod,
    StructuralInvariants,
}

impl CheckName {
    /// The full suite, one check per acceptance criterion.
    pub const SUITE: [CheckName; 9] = [
        CheckName::SpecialFunctions,
        CheckName::LtRoundtrip,
        CheckName::GoverningSystem,
        CheckName::FractionalReduction,
        CheckName::ClassicalLimit,
        CheckName::MonteCarlo,
        CheckName::Samplers,
        CheckName::BusyPeriod,
        CheckName::StructuralInvariants,
    ];

    const NAMES: [(CheckName, &'static str); 15] = [
        (CheckName::SpecialFunctions, "special-functions"),
        (CheckName::LtRoundtrip, "lt-roundtrip"),
        (CheckName::LtRoundtripP0, "lt-roundtrip-p0"),
        (CheckName::LtRoundtripPns, "lt-roundtrip-pns"),
        (CheckName::LtRoundtripMean, "lt-roundtrip-mean"),
        (CheckName::LtRoundtripBusy, "lt-roundtrip-busy"),
        (CheckName::LtRoundtripSurvival, "lt-roundtrip-survival"),
        (CheckName::LtRoundtripService, "lt-roundtrip-service"),
        (CheckName::GoverningSystem, "governing-system"),
        (CheckName::FractionalReduction, "fractional-reduction"),
        (CheckName::ClassicalLimit, "classical-limit"),
        (CheckName::MonteCarlo, "monte-carlo"),
        (CheckName::Samplers, "samplers"),
        (CheckName::BusyPeriod, "busy-period"),
        (CheckName::StructuralInvariants, "structural-invariants"),
    ];

    pub fn as_str(self) -> &'static str {
        Self::NAMES.iter().find(|(c, _)| *c == self).map(|(_, s)| *s).expect("every check has a name")
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::NAMES.iter().find(|(_, n)| *n == s).map(|(c, _)| *c).ok_or_else(|| {
            let known: Vec<&str> = Self::NAMES.iter().map(|(_, n)| *n).collect();
            format!("unknown check {s:?}; known checks: {}", known.join(", "))
        })
    }
}

impl TryFrom<String> for CheckName {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<CheckName> for String {
    fn from(c: CheckName) -> String {
        c.as_str().to_string()
    }
}

/// One comparison inside a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub quantity: String,
    /// The two routes compared, e.g. `["series", "talbot-inversion"]`.
    pub routes: [String; 2],
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Comparison {
    fn new(quantity: impl Into<String>, routes: [&str; 2], max_deviation: f64, tolerance: f64) -> Comparison {
        Comparison {
            quantity: quantity.into(),
            routes: routes.map(String::from),
            max_deviation,
            tolerance,
            // NaN deviations fail.
            passed: max_deviation <= tolerance,
        }
    }
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: CheckName,
    pub passed: bool,
    pub comparisons: Vec<Comparison>,
    /// Set when an oracle could not be evaluated.
    pub oracle_error: Option<String>,
}

impl CheckOutcome {
    fn from_result(name: CheckName, r: Result<Vec<Comparison>>) -> CheckOutcome {
        match r {
            Ok(comparisons) => CheckOutcome {
                name,
                passed: !comparisons.is_empty() && comparisons.iter().all(|c| c.passed),
                comparisons,
                oracle_error: None,
            },
            Err(e) => CheckOutcome { name, passed: false, comparisons: Vec::new(), oracle_error: Some(e.to_string()) },
        }
    }
}

/// Runs one check. Configuration problems abort with an error; numerical
/// failures are recorded in the outcome.
pub fn run_check(name: CheckName, cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let r = match name {
        CheckName::SpecialFunctions => special_functions(),
        CheckName::LtRoundtrip => lt_roundtrip(cfg, &LtQuantity::ALL),
        CheckName::LtRoundtripP0 => lt_roundtrip(cfg, &[LtQuantity::P0]),
        CheckName::LtRoundtripPns => lt_roundtrip(cfg, &[LtQuantity::P11]),
        CheckName::LtRoundtripMean => lt_roundtrip(cfg, &[LtQuantity::Mean]),
        CheckName::LtRoundtripBusy => lt_roundtrip(cfg, &[LtQuantity::Busy]),
        CheckName::LtRoundtripSurvival => lt_roundtrip(cfg, &[LtQuantity::Survival]),
        CheckName::LtRoundtripService => lt_roundtrip(cfg, &[LtQuantity::Service]),
        CheckName::GoverningSystem => governing_system(cfg),
        CheckName::FractionalReduction => fractional_reduction(cfg),
        CheckName::ClassicalLimit => classical_limit(cfg),
        CheckName::MonteCarlo => monte_carlo(cfg),
        CheckName::Samplers => samplers(cfg),
        CheckName::BusyPeriod => busy_period(cfg),
        CheckName::StructuralInvariants => structural_invariants(cfg),
    };
    match r {
        Err(HarnessError::Config(msg)) => Err(HarnessError::Config(msg)),
        other => Ok(CheckOutcome::from_result(name, other)),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

fn max_relative(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    pairs.map(|(v, reference)| ((v - reference) / reference).abs()).fold(0.0, f64::max)
}

fn special_functions() -> Result<Vec<Comparison>> {
    let exp_params = MLParams::new(1.0, 1.0, 1.0).context("exp parameters")?;
    let mut exp_dev = 0.0f64;
    for x in linspace(-10.0, 5.0, 1501) {
        let v = mittag_leffler3(&exp_params, x).context("E_{1,1}")?.value;
        exp_dev = exp_dev.max(((v - x.exp()) / x.exp()).abs());
    }
    let cosh_params = MLParams::new(2.0, 1.0, 1.0).context("cosh parameters")?;
    let mut cosh_dev = 0.0f64;
    for x in linspace(0.0, 50.0, 1001) {
        let v = mittag_leffler3(&cosh_params, x * x).context("E_{2,1}")?.value;
        cosh_dev = cosh_dev.max(((v - x.cosh()) / x.cosh()).abs());
    }
    Ok(vec![
        Comparison::new("E_{1,1}(x) on [-10, 5]", ["mittag-leffler", "exp"], exp_dev, 1e-10),
        Comparison::new("E_{2,1}(x^2) on [0, 50]", ["mittag-leffler", "cosh"], cosh_dev, 1e-10),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum LtQuantity {
    P0,
    P11,
    Mean,
    Busy,
    Survival,
    Service,
}

impl LtQuantity {
    const ALL: [LtQuantity; 6] =
        [LtQuantity::P0, LtQuantity::P11, LtQuantity::Mean, LtQuantity::Busy, LtQuantity::Survival, LtQuantity::Service];
}

const INVERSION: [&str; 2] = ["series", "talbot-inversion"];

fn lt_roundtrip(cfg: &ExperimentConfig, which: &[LtQuantity]) -> Result<Vec<Comparison>> {
    let q = &cfg.params;
    let pol = &cfg.truncation;
    let times = linspace(0.1, 3.0, 30);
    let state_pair = |name: &str, series: StateSeries, lt: LaplaceSeries| -> Result<Comparison> {
        let mut pairs = Vec::with_capacity(times.len());
        for &t in &times {
            let v = series.eval(t).context(name)?.value;
            let w = invert_lt(|z| lt.eval_c(z), t).context(name)?;
            pairs.push((v, w));
        }
        Ok(Comparison::new(name, INVERSION, max_relative(pairs.into_iter()), 1e-3))
    };
    let mut out = Vec::new();
    for &w in which {
        match w {
            LtQuantity::P0 => out.push(state_pair(
                "p0",
                StateSeries::p0(q, pol).context("p0")?,
                LaplaceSeries::p0(q, pol).context("p0")?,
            )?),
            LtQuantity::P11 => out.push(state_pair(
                "p_1_1",
                StateSeries::pns(1, 1, q, pol).context("p_1_1")?,
                LaplaceSeries::pns(1, 1, q, pol).context("p_1_1")?,
            )?),
            LtQuantity::Busy => out.push(state_pair(
                "busy",
                StateSeries::busy(q, pol).context("busy")?,
                LaplaceSeries::busy(q, pol).context("busy")?,
            )?),
            LtQuantity::Mean => {
                let mean = MeanLength::new(q, pol).context("mean")?;
                let lt = LaplaceSeries::mean(q, pol).context("mean")?;
                let mut pairs = Vec::new();
                for &t in &times {
                    pairs.push((mean.eval(t).context("mean")?.value, invert_lt(|z| lt.eval_c(z), t).context("mean")?));
                }
                out.push(Comparison::new("mean", INVERSION, max_relative(pairs.into_iter()), 1e-3));
            }
            LtQuantity::Survival => {
                for theta in event_rates(q) {
                    let name = format!("survival theta={theta}");
                    let mut pairs = Vec::new();
                    for &t in &times {
                        let v = survival_at(theta, t, q).context(&name)?.value;
                        let w = invert_lt(|z| Ok(event_survival_c(theta, z, q)), t).context(&name)?;
                        pairs.push((v, w));
                    }
                    out.push(Comparison::new(name, INVERSION, max_relative(pairs.into_iter()), 1e-3));
                }
            }
            LtQuantity::Service => {
                let mut pairs = Vec::new();
                for &t in &times {
                    let v = service_density_at(t, q).context("service")?.value;
                    let w = invert_lt(|z| Ok(service_c(z, q)), t).context("service")?;
                    pairs.push((v, w));
                }
                out.push(Comparison::new("service density", INVERSION, max_relative(pairs.into_iter()), 1e-3));
            }
        }
    }
    Ok(out)
}

/// Exponential rates of the inter-arrival, inter-phase and sojourn clocks.
fn event_rates(q: &QueueParams) -> [f64; 3] {
    [q.lambda, q.phase_rate(), q.lambda + q.phase_rate()]
}

fn governing_system(cfg: &ExperimentConfig) -> Result<Vec<Comparison>> {
    let q = &cfg.params;
    let pol = &cfg.truncation;
    let p0 = LaplaceSeries::p0(q, pol).context("p0 transform")?;
    let p11 = LaplaceSeries::pns(1, 1, q, pol).context("p_1_1 transform")?;
    let mut worst = 0.0f64;
    for z in [1.0, 2.0, 5.0] {
        let phi = phi_mix(z, q);
        let a = p0.eval(z).context("p0 transform")?;
        let b = p11.eval(z).context("p_1_1 transform")?;
        let lhs = phi * a - phi / z;
        let rhs = -q.lambda * a + q.phase_rate() * b;
        worst = worst.max(((lhs - rhs) / lhs).abs());
    }
    Ok(vec![Comparison::new("empty-state equation at z = 1, 2, 5", ["caputo-derivative", "balance"], worst, 1e-6)])
}

/// Series truncation used by the reduction check.
const REDUCTION_EPS: f64 = 1e-13;

fn fractional_reduction(cfg: &ExperimentConfig) -> Result<Vec<Comparison>> {
    let base = cfg.params;
    let q = QueueParams { c1: 1.0, c2: 0.0, ..base };
    q.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    // The same queue with a different (irrelevant) second order.
    let shifted = QueueParams { alpha2: 0.5 * q.alpha2, ..q };
    // Both routes are exact, so the series is summed well below the 1e-10
    // tolerance to keep its own truncation out of the comparison.
    let pol = &TruncationPolicy { eps_rel: cfg.truncation.eps_rel.min(REDUCTION_EPS), ..cfg.truncation };
    let route = SingleOrderRoute::new(&q, pol.max_conv_n as u64);
    let times = [0.25, 0.5, 1.0, 2.0];
    const ROUTES: [&str; 2] = ["mixed-series", "single-order"];
    let mut out = Vec::new();

    let compare = |name: String, mixed: &dyn Fn(f64) -> merlang_core::Result<f64>, single: &dyn Fn(f64) -> merlang_core::Result<f64>| -> Result<Comparison> {
        let mut pairs = Vec::new();
        for &t in &times {
            pairs.push((mixed(t).context(&name)?, single(t).context(&name)?));
        }
        Ok(Comparison::new(name, ROUTES, max_relative(pairs.into_iter()), 1e-10))
    };

    let p0 = StateSeries::p0(&q, pol).context("p0")?;
    out.push(compare("p0".into(), &|t| Ok(p0.eval(t)?.value), &|t| route.p0(t))?);
    let last = q.k;
    for (n, s) in [(1, 1), (1, last), (2, last)] {
        let series = StateSeries::pns(n, s, &q, pol).context("p_n_s")?;
        out.push(compare(format!("p_{n}_{s}"), &|t| Ok(series.eval(t)?.value), &|t| route.pns(n, s, t))?);
    }
    let mean = MeanLength::new(&q, pol).context("mean")?;
    out.push(compare("mean".into(), &|t| Ok(mean.eval(t)?.value), &|t| route.mean(t))?);
    let busy = StateSeries::busy(&q, pol).context("busy")?;
    out.push(compare("busy".into(), &|t| Ok(busy.eval(t)?.value), &|t| route.busy(t))?);
    for theta in event_rates(&q) {
        out.push(compare(
            format!("survival theta={theta}"),
            &|t| Ok(survival_at(theta, t, &q)?.value),
            &|t| route.survival(theta, t),
        )?);
    }
    out.push(compare("service density".into(), &|t| Ok(service_density_at(t, &q)?.value), &|t| route.service_density(t))?);

    // With c₂ = 0 the second order must drop out of every formula exactly.
    let other_p0 = StateSeries::p0(&shifted, pol).context("p0")?;
    let other_mean = MeanLength::new(&shifted, pol).context("mean")?;
    let mut drift = 0.0f64;
    for &t in &times {
        drift = drift.max((p0.eval(t).context("p0")?.value - other_p0.eval(t).context("p0")?.value).abs());
        drift = drift.max((mean.eval(t).context("mean")?.value - other_mean.eval(t).context("mean")?.value).abs());
        for theta in event_rates(&q) {
            let a = survival_at(theta, t, &q).context("survival")?.value;
            let b = survival_at(theta, t, &shifted).context("survival")?.value;
            drift = drift.max((a - b).abs());
        }
    }
    out.push(Comparison::new("second-order terms with c2 = 0", ["alpha2", "alpha2 / 2"], drift, 0.0));
    Ok(out)
}

fn classical_limit(cfg: &ExperimentConfig) -> Result<Vec<Comparison>> {
    let base = cfg.params;
    let q = QueueParams::classical(base.lambda, base.mu, base.k).map_err(|e| HarnessError::Config(e.to_string()))?;
    let pol = &cfg.truncation;
    let grid = TimeGrid::new(3.0, 31).context("grid")?;
    let chain = ErlangChain::new(q.lambda, q.mu, q.k, 400);
    let snaps = chain.solve(&grid.times());
    let boundary = snaps.iter().map(|s| s.boundary_mass + s.truncation).fold(0.0, f64::max);
    if boundary > 1e-8 {
        return Err(HarnessError::Oracle(format!("chain truncation leaves {boundary:e} of the mass at the cut")));
    }
    const ROUTES: [&str; 2] = ["series", "ctmc-uniformization"];
    let max_abs = |values: &[f64], reference: &dyn Fn(usize) -> f64| {
        values.iter().enumerate().map(|(j, v)| (v - reference(j)).abs()).fold(0.0, f64::max)
    };
    let mut out = Vec::new();
    let p0 = p0_curve(&q, &grid, pol).context("p0")?;
    out.push(Comparison::new("p0", ROUTES, max_abs(&p0.values, &|j| snaps[j].pmf[0]), 1e-3));
    for n in 1..=4u64 {
        for s in 1..=q.k {
            let curve = pns_curve(n, s, &q, &grid, pol).context("p_n_s")?;
            let m = phase_index(QueueState { n, s }, q.k) as usize;
            out.push(Comparison::new(format!("p_{n}_{s}"), ROUTES, max_abs(&curve.values, &|j| snaps[j].pmf[m]), 1e-3));
        }
    }
    let mean = mean_length_curve(&q, &grid, pol).context("mean")?;
    out.push(Comparison::new("mean", ROUTES, max_abs(&mean.values, &|j| snaps[j].mean_phase_index()), 1e-3));
    Ok(out)
}

/// Phase indices of simulated paths at the requested times, one row per
/// path, in stream order.
pub(crate) fn simulate_states(q: &QueueParams, seed: u64, n_paths: u64, times: &[f64]) -> Result<Vec<Vec<u64>>> {
    let horizon = times.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    (0..n_paths)
        .into_par_iter()
        .map(|id| {
            let path = simulate_path(q, horizon, RngStream::new(seed, id)).context("simulation")?;
            Ok(times.iter().map(|&t| phase_index(path.state_at(t), q.k)).collect())
        })
        .collect()
}

fn monte_carlo(cfg: &ExperimentConfig) -> Result<Vec<Comparison>> {
    let q = &cfg.params;
    let pol = &cfg.truncation;
    let times: Vec<f64> = cfg.pmf_times.iter().copied().filter(|&t| t > 0.0).collect();
    if times.is_empty() {
        return Err(HarnessError::Config("monte-carlo needs at least one positive pmf time".into()));
    }
    let states = simulate_states(q, cfg.seed, cfg.n_paths, &times)?;
    let n = cfg.n_paths as f64;
    const ROUTES: [&str; 2] = ["simulation", "series"];
    let mut out = Vec::new();

    let mut targets = vec![QueueState::EMPTY];
    for c in 1..=3 {
        for s in 1..=q.k {
            targets.push(QueueState { n: c, s });
        }
    }
    for st in targets {
        let series = if st.is_empty() { StateSeries::p0(q, pol) } else { StateSeries::pns(st.n, st.s, q, pol) };
        let series = series.context("state probability")?;
        let m = phase_index(st, q.k);
        let mut worst = 0.0f64;
        for (i, &t) in times.iter().enumerate() {
            let p = series.eval(t).context("state probability")?.value;
            let hits = states.iter().filter(|row| row[i] == m).count() as f64;
            let sigma = (p * (1.0 - p) / n).sqrt();
            worst = worst.max((hits / n - p).abs() / sigma);
        }
        let name = if st.is_empty() { "p0 (sigmas)".to_string() } else { format!("p_{}_{} (sigmas)", st.n, st.s) };
        out.push(Comparison::new(name, ROUTES, worst, 3.0));
    }

    let mean = MeanLength::new(q, pol).context("mean")?;
    let mut worst = 0.0f64;
    for (i, &t) in times.iter().enumerate() {
        let column: Vec<f64> = states.iter().map(|row| row[i] as f64).collect();
        let (emp, se) = crate::stats::mean_and_se(&column);
        let exact = mean.eval(t).context("mean")?.value;
        worst = worst.max((emp - exact).abs() / se);
    }
    out.push(Comparison::new("mean length (sigmas)", ROUTES, worst, 3.0));
    Ok(out)
}

/// Stream ids used by checks that draw variates outside path simulation.
mod streams {
    pub const COMPOSITE: u64 = 1 << 40;
    pub const DIRECT: u64 = (1 << 40) + 1;
    pub const EVENT_TIMES: u64 = (1 << 40) + 16;
    pub const BUSY: u64 = 1 << 41;
    pub const STRUCTURE: u64 = 1 << 42;
}

const SAMPLER_DRAWS: usize = 100_000;

/// Draws `count` variates in fixed-size blocks, each block on its own
/// stream, so the result does not depend on the number of workers.
fn draw_blocks(seed: u64, first_stream: u64, count: usize, draw: impl Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync) -> Vec<f64> {
    const BLOCK: usize = 8192;
    let blocks = count.div_ceil(BLOCK);
    let chunks: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::new(seed, first_stream + b as u64).rng();
            let len = BLOCK.min(count - b * BLOCK);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    chunks.concat()
}

fn samplers(cfg: &ExperimentConfig) -> Result<Vec<Comparison>> {
    let q = cfg.params;
    q.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    let clock = Exp::new(q.lambda).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut composite = draw_blocks(cfg.seed, streams::COMPOSITE << 8, SAMPLER_DRAWS, |rng| {
        let x = clock.sample(rng);
        sample_mixed_subordinator_at(x, &q, rng)
    });
    let mut direct =
        draw_blocks(cfg.seed, streams::DIRECT << 8, SAMPLER_DRAWS, |rng| sample_event_time(q.lambda, &q, rng));
    sort_sample(&mut composite);
    sort_sample(&mut direct);
    let mut out = vec![Comparison::new(
        "inter-arrival time, KS distance",
        ["subordinator-at-exponential-time", "event-time-sampler"],
        ks_two_sample(&composite, &direct),
        0.005,
    )];
    for (i, theta) in event_rates(&q).into_iter().enumerate() {
        let mut xs = draw_blocks(cfg.seed, (streams::EVENT_TIMES + i as u64) << 8, SAMPLER_DRAWS, |rng| {
            sample_event_time(theta, &q, rng)
        });
        sort_sample(&mut xs);
        let failure = std::sync::Mutex::new(None);
        let d = ks_one_sample(&xs, 25, |t| match survival_at(theta, t, &q) {
            Ok(v) => 1.0 - v.value,
            Err(e) => {
                failure.lock().expect("poisoned").get_or_insert(e.to_string());
                f64::NAN
            }
        });
        if let Some(e) = failure.into_inner().expect("poisoned") {
            return Err(HarnessError::Oracle(format!("survival series: {e}")));
        }
        out.push(Comparison::new(
            format!("survival theta={theta}, sup distance"),
            ["event-time-sampler", "series"],
            d,
            0.01,
        ));
    }
    Ok(out)
}

/// Completed excursions required by the busy-period check.
const BUSY_COMPLETED: usize = 10_000;

/// Simulates independent busy periods from `(1, k)` observed for
/// `horizon`, in blocks, until at least `min_completed` have finished.
pub(crate) fn busy_sample(q: &QueueParams, seed: u64, horizon: f64, min_completed: usize) -> Result<BusySample> {
    const BLOCK: u64 = 4096;
    let mut sample = BusySample::default();
    let mut next_block = 0u64;
    while sample.completed.len() < min_completed {
        let ids: Vec<u64> = (next_block * BLOCK..(next_block + 8) * BLOCK).collect();
        next_block += 8;
        let outcomes: Vec<Option<f64>> = ids
            .into_par_iter()
            .map(|id| simulate_busy_period(q, horizon, RngStream::new(seed, streams::BUSY + id)))
            .collect::<merlang_core::Result<_>>()
            .context("busy-period simulation")?;
        for o in outcomes {
            match o {
                Some(b) => sample.completed.push(b),
                None => sample.censored.push(horizon),
            }
        }
        if next_block > 8 * 1024 {
            return Err(HarnessError::Oracle("busy periods almost never complete within the horizon".into()));
        }
    }
    Ok(sample)
}

fn busy_period(cfg: &ExperimentConfig) -> Result<Vec<Comparison>> {
    let q = &cfg.params;
    let horizon = cfg.grid.t_max;
    let sample = busy_sample(q, cfg.seed, horizon, BUSY_COMPLETED)?;
    let series = StateSeries::busy(q, &cfg.truncation).context("busy-period series")?;
    let mut jumps = sample.completed.clone();
    sort_sample(&mut jumps);
    let empirical = sample.cdf_estimator();
    let values: Vec<f64> = jumps
        .par_iter()
        .map(|&t| series.eval(t).map(|v| v.value))
        .collect::<merlang_core::Result<_>>()
        .context("busy-period series")?;
    let at_end = series.eval(horizon).context("busy-period series")?.value;
    let lookup = |t: f64| {
        if t >= horizon {
            at_end
        } else {
            values[jumps.partition_point(|&x| x < t).min(values.len() - 1)]
        }
    };
    let d = sup_distance_on_steps(&jumps, horizon, &empirical, lookup);
    Ok(vec![Comparison::new(
        format!("busy-period CDF on [0, {horizon}], KS distance ({} completed)", sample.completed.len()),
        ["simulation", "series"],
        d,
        0.02,
    )])
}

/// Number of random parameter sets in the structural check.
const STRUCTURE_SETS: u64 = 1000;
const SLACK: f64 = 1e-9;

/// A random admissible parameter set with 0 < α₂ < α₁ ≤ 1, c₁ + c₂ = 1
/// and k ∈ [1, 8].
fn random_params<R: Rng>(rng: &mut R) -> QueueParams {
    let lambda = rng.gen_range(0.5..5.0);
    let mu = rng.gen_range(0.5..5.0);
    let k = rng.gen_range(1..=8);
    let c1 = 1.0 - rng.gen_range(0.0..1.0);
    let alpha1 = rng.gen_range(0.05..=1.0);
    let alpha2 = alpha1 * rng.gen_range(0.02..0.98);
    QueueParams { lambda, mu, k, c1, c2: 1.0 - c1, alpha1, alpha2 }
}

#[derive(Debug, Default, Clone, Copy)]
struct Violations {
    survival: u32,
    busy_cdf: u32,
    normalisation: u32,
    jumps: u32,
    determinism: u32,
    unconverged: u32,
}

impl Violations {
    fn add(self, o: Violations) -> Violations {
        Violations {
            survival: self.survival + o.survival,
            busy_cdf: self.busy_cdf + o.busy_cdf,
            normalisation: self.normalisation + o.normalisation,
            jumps: self.jumps + o.jumps,
            determinism: self.determinism + o.determinism,
            unconverged: self.unconverged + o.unconverged,
        }
    }
}

fn structure_one(q: &QueueParams, stream: RngStream, pol: &TruncationPolicy) -> merlang_core::Result<Violations> {
    let mut v = Violations::default();
    let (mut survival, mut busy_cdf, mut normalisation) = (0, 0, 0);
    let probes = [0.05, 0.2, 0.5, 1.0];
    let mut note = |p: PointValue| {
        if !p.converged {
            v.unconverged = 1;
        }
        p.value
    };

    for theta in event_rates(q) {
        let mut prev = 1.0;
        for t in probes.iter().chain(&[2.0, 4.0]) {
            let s = note(survival_at(theta, *t, q)?);
            if !(s <= prev + SLACK && s >= -SLACK) {
                survival = 1;
            }
            prev = s;
        }
    }

    let busy = StateSeries::busy(q, pol)?;
    let mut prev = 0.0;
    for t in probes {
        let f = note(busy.eval(t)?);
        if !(f >= prev - SLACK && f <= 1.0 + SLACK) {
            busy_cdf = 1;
        }
        prev = f;
    }

    let mut series = vec![StateSeries::p0(q, pol)?];
    for n in 1..=2 {
        for s in 1..=q.k {
            series.push(StateSeries::pns(n, s, q, pol)?);
        }
    }
    for t in [0.2, 1.0] {
        let mut total = 0.0;
        for s in &series {
            let p = note(s.eval(t)?);
            if p < -SLACK {
                normalisation = 1;
            }
            total += p;
        }
        if total > 1.0 + SLACK {
            normalisation = 1;
        }
    }
    v.survival = survival;
    v.busy_cdf = busy_cdf;
    v.normalisation = normalisation;

    let path = simulate_path(q, 2.0, stream)?;
    let legal = path.jumps[0].state == QueueState::EMPTY
        && path.jumps.windows(2).all(|w| {
            let step = phase_index(w[1].state, q.k) as i64 - phase_index(w[0].state, q.k) as i64;
            w[1].time > w[0].time && (step == q.k as i64 || step == -1)
        });
    if !legal {
        v.jumps = 1;
    }
    let again = simulate_path(q, 2.0, stream)?;
    if again != path {
        v.determinism = 1;
    }
    debug_assert_eq!(state_from_index(phase_index(QueueState::EMPTY, q.k), q.k), QueueState::EMPTY);
    Ok(v)
}

/// Truncation caps four times larger.
fn widened(pol: &TruncationPolicy) -> TruncationPolicy {
    TruncationPolicy {
        max_m: 4 * pol.max_m,
        max_r: 4 * pol.max_r,
        max_i: 4 * pol.max_i,
        max_conv_n: 4 * pol.max_conv_n,
        ..*pol
    }
}

fn structural_invariants(cfg: &ExperimentConfig) -> Result<Vec<Comparison>> {
    let mut rng = RngStream::new(cfg.seed, streams::STRUCTURE).rng();
    let sets: Vec<QueueParams> = (0..STRUCTURE_SETS).map(|_| random_params(&mut rng)).collect();
    let pol = cfg.truncation;
    let per_set: Vec<Violations> = sets
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let stream = RngStream::new(cfg.seed, streams::STRUCTURE + 1 + i as u64);
            let mut v = structure_one(q, stream, &pol);
            // Small orders with a fast busy rate need longer series; retry
            // once with larger caps before counting a set as unconverged.
            if v.as_ref().is_ok_and(|v| v.unconverged > 0) {
                v = structure_one(q, stream, &widened(&pol));
            }
            v.map_err(|e| HarnessError::Oracle(format!("parameter set {q:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    let total = per_set.into_iter().fold(Violations::default(), Violations::add);
    const ROUTES: [&str; 2] = ["property", "random parameter sets"];
    let n = STRUCTURE_SETS;
    Ok(vec![
        Comparison::new(format!("survival monotone in [0, 1] (violating sets of {n})"), ROUTES, total.survival as f64, 0.0),
        Comparison::new(format!("busy CDF monotone in [0, 1] (violating sets of {n})"), ROUTES, total.busy_cdf as f64, 0.0),
        Comparison::new(format!("partial normalisation (violating sets of {n})"), ROUTES, total.normalisation as f64, 0.0),
        Comparison::new(format!("phase-index jumps +k or -1 (violating sets of {n})"), ROUTES, total.jumps as f64, 0.0),
        Comparison::new(format!("seed determinism (violating sets of {n})"), ROUTES, total.determinism as f64, 0.0),
        Comparison::new(
            format!("series evaluations converged (failing sets of {n})"),
            ROUTES,
            total.unconverged as f64,
            0.0,
        ),
    ])
}
