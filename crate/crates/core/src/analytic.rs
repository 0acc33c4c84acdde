//! Time-domain curves of the queue: state probabilities, queue-length pmf,
//! mean length, event-time survival functions, service density and the
//! busy-period CDF.
//!
//! The state-probability, mean and busy-period series are sums over
//! products of kernel powers. Grouping them by the total power `N`,
//!
//! ```text
//! p(t) = Σ_N ω_N · c₁^{−N} (c₁ f^{*N}_N(t) + c₂ g^{*N}_N(t)),
//! ```
//!
//! each power is obtained at once from its transform
//! `Φ(z) / (λ+kμ+φ(z))^N`, where `Φ(z) = c₁z^{α₁−1}+c₂z^{α₂−1}`, by a
//! log-scaled Bromwich integral. The weights `ω_N` come from
//! [`ExponentSeries`]. The event-time survival functions and the service
//! density are Prabhakar sums of low order and use the Mittag-Leffler
//! function directly.

use crate::coeffs::{prabhakar_power, sum_exponent_series, ExponentSeries, QueueParams};
use crate::contour::{self, Hyperbola, LogScaled};
use crate::error::{invalid, Error, Result};
use crate::specfun::{ln_gamma, mittag_leffler3, MLParams};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cell::{Cell, RefCell};
use std::io::Write;

/// Uniform grid `t_j = j·h` on `[0, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_points: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_points: usize) -> Result<TimeGrid> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(invalid(format!("t_max must be positive, got {t_max}")));
        }
        if n_points < 2 {
            return Err(invalid("a time grid needs at least two points"));
        }
        Ok(TimeGrid { t_max, n_points })
    }

    pub fn h(&self) -> f64 {
        self.t_max / (self.n_points - 1) as f64
    }

    pub fn t(&self, j: usize) -> f64 {
        if j + 1 == self.n_points {
            self.t_max
        } else {
            j as f64 * self.h()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.t(j)).collect()
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid { t_max: 3.0, n_points: 3001 }
    }
}

/// What a curve represents; governs the range checks and export clamping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Probability,
    Survival,
    Cdf,
    Mean,
    Density,
}

impl CurveKind {
    fn is_bounded(self) -> bool {
        matches!(self, CurveKind::Probability | CurveKind::Survival | CurveKind::Cdf)
    }
}

/// A function sampled on a [`TimeGrid`] with a truncation-error estimate per
/// point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub name: String,
    pub kind: CurveKind,
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub trunc_error: Vec<f64>,
    /// Set when some point's error estimate exceeds ten times the relative
    /// tolerance of the policy.
    pub flagged: bool,
}

impl Curve {
    fn export_value(&self, v: f64) -> f64 {
        if self.kind.is_bounded() {
            v.clamp(0.0, 1.0)
        } else {
            v
        }
    }

    /// CSV with header `t,value,trunc_error` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,value,trunc_error")?;
        for (j, (&v, &e)) in self.values.iter().zip(&self.trunc_error).enumerate() {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", self.grid.t(j), self.export_value(v), e)?;
        }
        Ok(())
    }

    /// JSON document with the grid, the (export-clamped) values and metadata.
    pub fn to_json(&self) -> serde_json::Value {
        let values: Vec<f64> = self.values.iter().map(|&v| self.export_value(v)).collect();
        serde_json::json!({
            "name": self.name,
            "kind": self.kind,
            "grid": { "t_max": self.grid.t_max, "n_points": self.grid.n_points, "h": self.grid.h() },
            "values": values,
            "trunc_error": self.trunc_error,
            "flagged": self.flagged,
        })
    }
}

/// Truncation of the infinite series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruncationPolicy {
    /// Relative size below which three consecutive terms stop a sum.
    pub eps_rel: f64,
    pub max_m: usize,
    pub max_r: usize,
    pub max_i: usize,
    /// Largest kernel power (total exponent) retained.
    pub max_conv_n: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy { eps_rel: 1e-10, max_m: 800, max_r: 200, max_i: 200, max_conv_n: 800 }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_rel > 0.0 && self.eps_rel < 1.0) {
            return Err(invalid(format!("eps_rel must lie in (0, 1), got {}", self.eps_rel)));
        }
        if self.max_m == 0 || self.max_r == 0 || self.max_i == 0 || self.max_conv_n == 0 {
            return Err(invalid("truncation caps must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn max_order(&self) -> usize {
        self.max_conv_n
    }
}

/// A value with its absolute error estimate and convergence status.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Numerator of the kernel-power transform.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Numerator {
    /// `Φ(z) = c₁z^{α₁−1} + c₂z^{α₂−1}` (state probabilities).
    Mix,
    /// `z^{−1}` (mean length and busy period).
    Step,
}

/// One of the exponent-grouped series, ready to be evaluated at any t.
#[derive(Debug, Clone)]
pub struct StateSeries {
    q: QueueParams,
    weights: ExponentSeries,
    numerator: Numerator,
    eps: f64,
}

impl StateSeries {
    pub fn p0(q: &QueueParams, pol: &TruncationPolicy) -> Result<StateSeries> {
        Self::build(q, pol, Numerator::Mix, ExponentSeries::p0)
    }

    pub fn pns(n: u64, s: u32, q: &QueueParams, pol: &TruncationPolicy) -> Result<StateSeries> {
        check_state(n, s, q)?;
        Self::build(q, pol, Numerator::Mix, |q, pol| ExponentSeries::pns(n, s, q, pol))
    }

    /// Second term of the mean queue length, `kμ Σ A⁰/c₁^{a⁰} h^{*a⁰}`.
    pub fn mean_tail(q: &QueueParams, pol: &TruncationPolicy) -> Result<StateSeries> {
        Self::build(q, pol, Numerator::Step, ExponentSeries::mean)
    }

    pub fn busy(q: &QueueParams, pol: &TruncationPolicy) -> Result<StateSeries> {
        Self::build(q, pol, Numerator::Step, ExponentSeries::busy)
    }

    fn build(
        q: &QueueParams,
        pol: &TruncationPolicy,
        numerator: Numerator,
        weights: impl Fn(&QueueParams, &TruncationPolicy) -> ExponentSeries,
    ) -> Result<StateSeries> {
        q.validate()?;
        pol.validate()?;
        let q = q.leading();
        Ok(StateSeries { weights: weights(&q, pol), q, numerator, eps: pol.eps_rel })
    }

    pub fn weights(&self) -> &ExponentSeries {
        &self.weights
    }

    /// Value at `t > 0`.
    pub fn eval(&self, t: f64) -> Result<PointValue> {
        if !(t.is_finite() && t > 0.0) {
            return Err(invalid(format!("series are evaluated at t > 0, got {t}")));
        }
        let powers = KernelPowers::new(&self.q, t, self.numerator);
        let s = sum_exponent_series(&self.weights, self.eps, |order| Ok(powers.power(order)))?;
        Ok(PointValue { value: s.value, error: s.error, converged: s.converged })
    }
}

/// Contour data for the kernel powers at one time point.
///
/// For large orders `N` the integrand `e^{zt}/(λ+kμ+φ(z))^N` has a saddle
/// point far to the right of the default contour, and inverting along the
/// default contour would cancel huge node values. The contour is therefore
/// moved to pass near the saddle, in steps of 2^{1/8} so that consecutive
/// orders share node data.
///
/// When `α₁` is close to one, `1/(λ+kμ+φ(z))^N` grows along the tails of
/// the hyperbola as they approach the singularity near `−(λ+kμ)`, and the
/// trapezoid sum is cut off too early. The node count is then doubled,
/// which pushes the tails further out, until the outermost term is
/// negligible. A contour moved far to the right also spreads its nodes
/// apart, so the count is doubled as well while the nodes are too coarse for
/// the peak at the saddle point.
struct KernelPowers {
    q: QueueParams,
    t: f64,
    numerator: Numerator,
    /// Lowest node level that was sufficient for the previous order; orders
    /// are requested in increasing order, and need more nodes as they grow.
    level: Cell<usize>,
    cache: RefCell<Vec<Option<(i32, ContourData)>>>,
}

struct ContourData {
    hyperbola: Hyperbola,
    ln_numerator: Vec<Complex64>,
    ln_denominator: Vec<Complex64>,
}

/// Crossings are moved in steps of 2^{1/SHIFT_STEPS}.
const SHIFT_STEPS: f64 = 8.0;
/// Node counts `DEFAULT_NODES · 2^level` for `level < NODE_LEVELS`.
const NODE_LEVELS: usize = 4;
/// Largest acceptable outermost node term, relative to the result.
const TAIL_TOL: f64 = 1e-14;
/// Smallest acceptable ratio of the saddle-peak width to the node spacing.
const MIN_NODES_PER_WIDTH: f64 = 1.5;

impl KernelPowers {
    fn new(q: &QueueParams, t: f64, numerator: Numerator) -> KernelPowers {
        KernelPowers {
            q: *q,
            t,
            numerator,
            level: Cell::new(0),
            cache: RefCell::new((0..NODE_LEVELS).map(|_| None).collect()),
        }
    }

    fn nodes(level: usize) -> usize {
        contour::DEFAULT_NODES << level
    }

    fn contour(&self, level: usize, bucket: i32) -> ContourData {
        let q = &self.q;
        let nodes = Self::nodes(level);
        let crossing = Hyperbola::default_crossing(self.t, nodes) * (bucket as f64 / SHIFT_STEPS).exp2();
        let hyperbola = Hyperbola::through(self.t, nodes, crossing);
        let mut ln_numerator = Vec::with_capacity(hyperbola.z.len());
        let mut ln_denominator = Vec::with_capacity(hyperbola.z.len());
        for &lz in &hyperbola.ln_z {
            let z1 = (q.alpha1 * lz).exp();
            let z2 = if q.c2 > 0.0 { (q.alpha2 * lz).exp() } else { Complex64::new(0.0, 0.0) };
            let phi = q.c1 * z1 + q.c2 * z2;
            ln_denominator.push((q.busy_rate() + phi).ln());
            ln_numerator.push(match self.numerator {
                Numerator::Mix => phi.ln() - lz,
                Numerator::Step => -lz,
            });
        }
        ContourData { hyperbola, ln_numerator, ln_denominator }
    }

    /// Width `1/√g''` of the Gaussian peak of `e^{g}`, with
    /// `g(z) = zt − N ln(λ+kμ+φ(z))`, at a real saddle point `z`.
    fn saddle_width(&self, order: f64, z: f64) -> f64 {
        let q = &self.q;
        let term = |c: f64, a: f64| (c * z.powf(a), c * a * z.powf(a - 1.0), c * a * (a - 1.0) * z.powf(a - 2.0));
        let (p1, d1, s1) = term(q.c1, q.alpha1);
        let (p2, d2, s2) = if q.c2 > 0.0 { term(q.c2, q.alpha2) } else { (0.0, 0.0, 0.0) };
        let denom = q.busy_rate() + p1 + p2;
        let slope = (d1 + d2) / denom;
        let curvature = order * (slope * slope - (s1 + s2) / denom);
        1.0 / curvature.sqrt()
    }

    /// Real saddle point of `zt − N ln(λ+kμ+φ(z))`, if it lies to the right
    /// of `from`.
    fn saddle(&self, order: f64, from: f64) -> Option<f64> {
        let q = &self.q;
        let slope = |z: f64| {
            let phi = q.c1 * z.powf(q.alpha1) + q.c2 * z.powf(q.alpha2);
            let dphi = q.c1 * q.alpha1 * z.powf(q.alpha1 - 1.0) + q.c2 * q.alpha2 * z.powf(q.alpha2 - 1.0);
            order * dphi / (q.busy_rate() + phi) - self.t
        };
        let mut lo = from;
        if slope(lo) <= 0.0 {
            return None;
        }
        let mut hi = 2.0 * lo;
        while slope(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = (lo * hi).sqrt();
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(hi)
    }

    /// The power computed with `DEFAULT_NODES · 2^level` nodes, and whether
    /// that is enough: the outermost node term must be negligible and the
    /// nodes must resolve the peak at the saddle point.
    fn power_at(&self, level: usize, order: usize) -> (LogScaled, bool) {
        let n = order as f64;
        let nodes = Self::nodes(level);
        let default = Hyperbola::default_crossing(self.t, nodes);
        let (bucket, resolved) = match self.saddle(n, default) {
            Some(z) => {
                let bucket = (SHIFT_STEPS * (z / default).log2()).round() as i32;
                let crossing = default * (bucket as f64 / SHIFT_STEPS).exp2();
                let spacing = Hyperbola::spacing_at(crossing, nodes);
                (bucket, self.saddle_width(n, z) >= MIN_NODES_PER_WIDTH * spacing)
            }
            None => (0, true),
        };
        let mut cache = self.cache.borrow_mut();
        let slot = &mut cache[level];
        if slot.as_ref().is_none_or(|c| c.0 != bucket) {
            *slot = Some((bucket, self.contour(level, bucket)));
        }
        let data = &slot.as_ref().expect("contour data was just filled").1;
        let (value, tail) = data.hyperbola.invert_with_tail(|j| data.ln_numerator[j] - n * data.ln_denominator[j]);
        (value, resolved && tail <= TAIL_TOL)
    }

    fn power(&self, order: usize) -> LogScaled {
        let mut level = self.level.get();
        loop {
            let (value, adequate) = self.power_at(level, order);
            if adequate || level + 1 == NODE_LEVELS {
                self.level.set(level);
                return value;
            }
            level += 1;
        }
    }
}

fn check_state(n: u64, s: u32, q: &QueueParams) -> Result<()> {
    if n == 0 || s == 0 || s > q.k {
        return Err(invalid(format!("(n, s) = ({n}, {s}) is not a busy state for k = {}", q.k)));
    }
    Ok(())
}

/// Evaluates `point` on every grid point after the first and assembles a
/// curve, with `initial` as the value at t = 0.
fn build_curve(
    name: String,
    kind: CurveKind,
    grid: &TimeGrid,
    pol: &TruncationPolicy,
    initial: f64,
    mut point: impl FnMut(f64) -> Result<PointValue>,
) -> Result<Curve> {
    let mut values = Vec::with_capacity(grid.n_points);
    let mut errors = Vec::with_capacity(grid.n_points);
    let mut flagged = false;
    values.push(initial);
    errors.push(0.0);
    for j in 1..grid.n_points {
        let v = point(grid.t(j))?;
        if !v.converged || v.error > 10.0 * pol.eps_rel * v.value.abs().max(f64::MIN_POSITIVE) {
            flagged = true;
        }
        values.push(v.value);
        errors.push(v.error);
    }
    Ok(Curve { name, kind, grid: *grid, values, trunc_error: errors, flagged })
}

/// Zero-state probability p₀(t).
pub fn p0_curve(q: &QueueParams, grid: &TimeGrid, pol: &TruncationPolicy) -> Result<Curve> {
    let series = StateSeries::p0(q, pol)?;
    build_curve("p0".into(), CurveKind::Probability, grid, pol, 1.0, |t| series.eval(t))
}

/// State probability p_{n,s}(t).
pub fn pns_curve(n: u64, s: u32, q: &QueueParams, grid: &TimeGrid, pol: &TruncationPolicy) -> Result<Curve> {
    let series = StateSeries::pns(n, s, q, pol)?;
    build_curve(format!("p_{n}_{s}"), CurveKind::Probability, grid, pol, 0.0, |t| series.eval(t))
}

/// Probability that the queue holds `n` phases in total.
pub fn queue_length_pmf(n: u64, q: &QueueParams, grid: &TimeGrid, pol: &TruncationPolicy) -> Result<Curve> {
    if n == 0 {
        return p0_curve(q, grid, pol);
    }
    let k = q.k as u64;
    let s = (n - 1) % k + 1;
    let customers = (n - s) / k + 1;
    pns_curve(customers, s as u32, q, grid, pol)
}

/// Mean number of phases in the system.
#[derive(Debug, Clone)]
pub struct MeanLength {
    q: QueueParams,
    tail: StateSeries,
}

impl MeanLength {
    pub fn new(q: &QueueParams, pol: &TruncationPolicy) -> Result<MeanLength> {
        Ok(MeanLength { q: q.leading(), tail: StateSeries::mean_tail(q, pol)? })
    }

    pub fn eval(&self, t: f64) -> Result<PointValue> {
        let q = &self.q;
        let drift = q.k as f64 * (q.lambda - q.mu) / q.c1;
        let lead = if q.is_mixed() {
            let p = MLParams::new(q.alpha1 - q.alpha2, q.alpha1 + 1.0, 1.0)?;
            let e = mittag_leffler3(&p, -(q.c2 / q.c1) * t.powf(q.alpha1 - q.alpha2))?;
            PointValue { value: e.value, error: e.error, converged: true }
        } else {
            PointValue { value: (-ln_gamma(q.alpha1 + 1.0)).exp(), error: 0.0, converged: true }
        };
        let scale = drift * t.powf(q.alpha1);
        let tail = self.tail.eval(t)?;
        Ok(PointValue {
            value: scale * lead.value + tail.value,
            error: scale.abs() * lead.error + tail.error,
            converged: tail.converged,
        })
    }
}

pub fn mean_length_curve(q: &QueueParams, grid: &TimeGrid, pol: &TruncationPolicy) -> Result<Curve> {
    let mean = MeanLength::new(q, pol)?;
    build_curve("mean".into(), CurveKind::Mean, grid, pol, 0.0, |t| mean.eval(t))
}

/// Survival function of an event time built from an exponential clock of
/// rate θ: θ = λ (inter-arrival), θ = kμ (inter-phase), θ = λ+kμ (sojourn).
pub fn survival_at(theta: f64, t: f64, q: &QueueParams) -> Result<PointValue> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(invalid(format!("theta must be positive, got {theta}")));
    }
    if t == 0.0 {
        return Ok(PointValue { value: 1.0, error: 0.0, converged: true });
    }
    let q = q.leading();
    let b = theta / q.c1;
    let (v1, e1) = prabhakar_power(&q, q.alpha1, 1, b, t, 1e-16)?;
    let (v2, e2) = if q.c2 > 0.0 { prabhakar_power(&q, q.alpha2, 1, b, t, 1e-16)? } else { (0.0, 0.0) };
    let a = q.c2 / q.c1;
    Ok(PointValue { value: v1 + a * v2, error: e1 + a * e2, converged: true })
}

pub fn survival_event_time(theta: f64, q: &QueueParams, grid: &TimeGrid, pol: &TruncationPolicy) -> Result<Curve> {
    q.validate()?;
    build_curve(format!("survival_theta_{theta}"), CurveKind::Survival, grid, pol, 1.0, |t| survival_at(theta, t, q))
}

/// Density of one exponential-clock phase time (θ = kμ).
pub fn phase_density_at(t: f64, q: &QueueParams) -> Result<PointValue> {
    power_density_at(1, t, q)
}

/// Density of the full service time (k phases).
pub fn service_density_at(t: f64, q: &QueueParams) -> Result<PointValue> {
    power_density_at(q.k as u64, t, q)
}

/// Inverse transform of `(kμ/(kμ+φ(z)))^power`.
fn power_density_at(power: u64, t: f64, q: &QueueParams) -> Result<PointValue> {
    let q = q.leading();
    let b = q.phase_rate() / q.c1;
    let (v, e) = prabhakar_power(&q, 1.0, power, b, t, 1e-16)?;
    let scale = (power as f64 * b.ln()).exp();
    Ok(PointValue { value: scale * v, error: scale * e, converged: true })
}

fn density_at_origin(power: u64, q: &QueueParams) -> f64 {
    let q = q.leading();
    let p = power as f64 * q.alpha1 - 1.0;
    if p > 0.0 {
        0.0
    } else if p == 0.0 {
        (q.phase_rate() / q.c1).powi(power as i32) / ln_gamma(power as f64 * q.alpha1).exp()
    } else {
        f64::INFINITY
    }
}

pub fn service_density(q: &QueueParams, grid: &TimeGrid, pol: &TruncationPolicy) -> Result<Curve> {
    q.validate()?;
    let k = q.k as u64;
    build_curve("service_density".into(), CurveKind::Density, grid, pol, density_at_origin(k, q), |t| {
        service_density_at(t, q)
    })
}

pub fn busy_period_cdf(q: &QueueParams, grid: &TimeGrid, pol: &TruncationPolicy) -> Result<Curve> {
    let series = StateSeries::busy(q, pol)?;
    build_curve("busy_cdf".into(), CurveKind::Cdf, grid, pol, 0.0, |t| series.eval(t))
}

/// A function sampled as `f(t_j) = t_j^p · regular[j]` on a grid, where the
/// exponent `p > −1` captures the power-law behaviour at the origin and
/// `regular` is bounded (its entry at `j = 0` is the limit at `0⁺`).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledKernel {
    pub grid: TimeGrid,
    pub exponent: f64,
    pub regular: Vec<f64>,
}

impl SampledKernel {
    /// Samples `f` on the grid; `origin` is the limit of `f(t)/t^p` at 0⁺.
    pub fn sample(grid: &TimeGrid, exponent: f64, origin: f64, f: impl Fn(f64) -> Result<f64>) -> Result<SampledKernel> {
        if exponent <= -1.0 {
            return Err(invalid(format!("endpoint exponent must exceed -1, got {exponent}")));
        }
        let mut regular = Vec::with_capacity(grid.n_points);
        regular.push(origin);
        for j in 1..grid.n_points {
            let t = grid.t(j);
            regular.push(f(t)? / t.powf(exponent));
        }
        Ok(SampledKernel { grid: *grid, exponent, regular })
    }

    pub fn value(&self, j: usize) -> f64 {
        if j == 0 {
            if self.exponent == 0.0 {
                self.regular[0]
            } else if self.exponent > 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.grid.t(j).powf(self.exponent) * self.regular[j]
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.grid.n_points).map(|j| self.value(j)).collect()
    }
}

/// Cell moments of `u^p` on `[c h, (c+1) h]`: `∫ u^p du` and
/// `∫ u^p (u − c h)/h du`.
fn cell_moments(p: f64, h: f64, cells: usize) -> Vec<(f64, f64)> {
    let hp1 = h.powf(p + 1.0);
    (0..cells)
        .map(|c| {
            let (a, b) = (c as f64, c as f64 + 1.0);
            let i0 = (b.powf(p + 1.0) - a.powf(p + 1.0)) / (p + 1.0);
            let i1 = (b.powf(p + 2.0) - a.powf(p + 2.0)) / (p + 2.0) - a * i0;
            (hp1 * i0, hp1 * i1)
        })
        .collect()
}

/// `∫_0^{M h} u^p Ψ(u) du` with Ψ linearly interpolated from its grid values.
fn product_rule(moments: &[(f64, f64)], psi: impl Fn(usize) -> f64, cells: usize) -> f64 {
    let mut acc = 0.0;
    for (c, &(i0, i1)) in moments.iter().enumerate().take(cells) {
        acc += psi(c) * (i0 - i1) + psi(c + 1) * i1;
    }
    acc
}

fn beta_fn(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Convolution of two sampled kernels on the same grid.
fn convolve(f: &SampledKernel, g: &SampledKernel) -> SampledKernel {
    let grid = f.grid;
    let n = grid.n_points;
    let h = grid.h();
    let (pf, pg) = (f.exponent, g.exponent);
    let p = pf + pg + 1.0;
    let mf = cell_moments(pf, h, n);
    let mg = cell_moments(pg, h, n);
    let b = beta_fn(pf + 1.0, pg + 1.0);
    let mut regular = vec![0.0; n];
    regular[0] = f.regular[0] * g.regular[0] * b;
    if n > 1 {
        let avg = |k: &SampledKernel| 0.5 * (k.regular[0] + k.regular[1]);
        regular[1] = avg(f) * avg(g) * b;
    }
    for j in 2..n {
        let split = j / 2;
        // [0, t_split]: singularity of f at the origin, g smooth
        let left = product_rule(&mf, |i| f.regular[i] * g.value(j - i), split);
        // [t_split, t_j] mirrored: singularity of g at the origin, f smooth
        let right = product_rule(&mg, |i| g.regular[i] * f.value(j - i), j - split);
        regular[j] = (left + right) / grid.t(j).powf(p);
    }
    SampledKernel { grid, exponent: p, regular }
}

/// N-fold self-convolution of a sampled kernel by repeated squaring.
pub fn nfold_convolve(kernel: &SampledKernel, n: usize, pol: &TruncationPolicy) -> Result<SampledKernel> {
    if n == 0 {
        return Err(invalid("convolution power must be at least 1"));
    }
    if n > pol.max_conv_n {
        return Err(Error::InvalidParameter(format!(
            "convolution power {n} exceeds the policy cap {}",
            pol.max_conv_n
        )));
    }
    let mut result: Option<SampledKernel> = None;
    let mut base = kernel.clone();
    let mut rest = n;
    loop {
        if rest & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => convolve(&r, &base),
            });
        }
        rest >>= 1;
        if rest == 0 {
            break;
        }
        base = convolve(&base, &base);
    }
    Ok(result.expect("n >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_kernel_powers_at_large_order() {
        // α = 1, c₂ = 0: the N-fold power is t^{N−1} e^{−bt} / Γ(N).
        let q = QueueParams::classical(6.0, 5.0, 4).unwrap();
        let b = q.busy_rate();
        for t in [1.0, 3.0] {
            let powers = KernelPowers::new(&q, t, Numerator::Mix);
            for order in 1..=(2.0 * b * t) as usize {
                let n = order as f64;
                let exact = (n - 1.0) * t.ln() - b * t - ln_gamma(n);
                // Compared in the scale of the node sum, where the reported
                // rounding applies.
                let got = powers.power(order);
                let expected = (exact - got.ln_scale).exp();
                let slack = 1e-9 * expected + 4.0 * got.rounding;
                assert!((got.mantissa - expected).abs() <= slack, "t={t} N={order}: {got:?} vs {expected}");
            }
        }
    }

    #[test]
    fn grid_layout() {
        let g = TimeGrid::default();
        assert_eq!(g.t(0), 0.0);
        assert_eq!(g.t(3000), 3.0);
        assert!((g.h() - 1e-3).abs() < 1e-15);
        assert!(TimeGrid::new(0.0, 10).is_err());
    }

    #[test]
    fn exponential_self_convolution() {
        let grid = TimeGrid::new(4.0, 4001).unwrap();
        let k = SampledKernel::sample(&grid, 0.0, 1.0, |t| Ok((-t).exp())).unwrap();
        let pol = TruncationPolicy::default();
        assert_eq!(nfold_convolve(&k, 1, &pol).unwrap(), k);
        let two = nfold_convolve(&k, 2, &pol).unwrap();
        let err = (0..grid.n_points)
            .map(|j| (two.value(j) - grid.t(j) * (-grid.t(j)).exp()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-4, "max error {err}");
        let three = nfold_convolve(&k, 3, &pol).unwrap();
        let t = grid.t(2000);
        assert_relative_eq!(three.value(2000), t * t * (-t).exp() / 2.0, max_relative = 1e-4);
    }

    #[test]
    fn singular_kernel_convolution() {
        // t^{-1/2}/√π convolved with itself is 1
        let grid = TimeGrid::new(2.0, 2001).unwrap();
        let c = 1.0 / std::f64::consts::PI.sqrt();
        let k = SampledKernel::sample(&grid, -0.5, c, |t| Ok(c / t.sqrt())).unwrap();
        let two = nfold_convolve(&k, 2, &TruncationPolicy::default()).unwrap();
        assert_relative_eq!(two.value(1), 1.0, max_relative = 1e-12);
        // linear interpolation of the smooth factor costs O((h/t)²)
        for j in [100usize, 500, 2000] {
            assert_relative_eq!(two.value(j), 1.0, max_relative = 2e-5);
        }
    }

    #[test]
    fn initial_values() {
        let q = QueueParams::baseline();
        let grid = TimeGrid::new(0.2, 3).unwrap();
        let pol = TruncationPolicy::default();
        assert_eq!(p0_curve(&q, &grid, &pol).unwrap().values[0], 1.0);
        assert_eq!(pns_curve(1, 1, &q, &grid, &pol).unwrap().values[0], 0.0);
        assert_eq!(mean_length_curve(&q, &grid, &pol).unwrap().values[0], 0.0);
        assert_eq!(busy_period_cdf(&q, &grid, &pol).unwrap().values[0], 0.0);
        assert_eq!(survival_event_time(6.0, &q, &grid, &pol).unwrap().values[0], 1.0);
    }

    #[test]
    fn classical_closed_forms() {
        let q = QueueParams::classical(6.0, 5.0, 2).unwrap();
        for &t in &[0.1, 0.7, 2.0] {
            assert_relative_eq!(survival_at(6.0, t, &q).unwrap().value, (-6.0 * t).exp(), max_relative = 1e-12);
            let rate = 10.0;
            let erlang = rate * rate * t * (-rate * t).exp();
            assert_relative_eq!(service_density_at(t, &q).unwrap().value, erlang, max_relative = 1e-10);
        }
    }

    #[test]
    fn queue_length_index_map() {
        let q = QueueParams::baseline();
        let grid = TimeGrid::new(0.5, 3).unwrap();
        let pol = TruncationPolicy::default();
        let a = queue_length_pmf(7, &q, &grid, &pol).unwrap();
        let b = pns_curve(2, 3, &q, &grid, &pol).unwrap();
        assert_eq!(a.values, b.values);
        let a = queue_length_pmf(4, &q, &grid, &pol).unwrap();
        let b = pns_curve(1, 4, &q, &grid, &pol).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn csv_export_clamps_probabilities() {
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let c = Curve {
            name: "x".into(),
            kind: CurveKind::Probability,
            grid,
            values: vec![1.0 + 1e-12, -1e-13],
            trunc_error: vec![0.0, 0.0],
            flagged: false,
        };
        let mut out = Vec::new();
        c.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,value,trunc_error");
        assert_eq!(lines[1], "0.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0");
        assert!(lines[2].contains(",0.0000000000000000e0,"));
    }
}
