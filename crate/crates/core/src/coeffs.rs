//! Model parameters, the combinatorial constants of the state-probability
//! series, and the single-factor convolution kernels.
//!
//! All factorial and power products are assembled as logarithms and
//! exponentiated once at the end.

use std::cell::RefCell;
use std::rc::Rc;

use crate::analytic::TruncationPolicy;
use crate::contour::{invert_log, LogScaled, DEFAULT_NODES};
use crate::error::{invalid, Error, Result};
use crate::specfun::{ln_gamma, ml3_scaled, MLParams};
use serde::{Deserialize, Serialize};

/// Full configuration of the mixed time-changed Erlang queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueParams {
    /// Arrival rate λ.
    pub lambda: f64,
    /// Service rate μ (each of the k phases runs at rate kμ).
    pub mu: f64,
    /// Number of service phases.
    pub k: u32,
    /// Weight of the α₁-stable component of the time change.
    pub c1: f64,
    /// Weight of the α₂-stable component of the time change.
    pub c2: f64,
    /// Order of the first stable component, in (0, 1].
    pub alpha1: f64,
    /// Order of the second stable component, in (0, 1).
    pub alpha2: f64,
}

impl QueueParams {
    pub fn new(lambda: f64, mu: f64, k: u32, c1: f64, c2: f64, alpha1: f64, alpha2: f64) -> Result<QueueParams> {
        let q = QueueParams { lambda, mu, k, c1, c2, alpha1, alpha2 };
        q.validate()?;
        Ok(q)
    }

    /// Default experiment parameters:
    /// k = 4, λ = 6, μ = 5, c₁ = 0.4, c₂ = 0.6, α₁ = 0.5, α₂ = 0.3.
    pub fn baseline() -> QueueParams {
        QueueParams { lambda: 6.0, mu: 5.0, k: 4, c1: 0.4, c2: 0.6, alpha1: 0.5, alpha2: 0.3 }
    }

    /// Classical Erlang queue (no time change): c₁ = 1, α₁ = 1.
    pub fn classical(lambda: f64, mu: f64, k: u32) -> Result<QueueParams> {
        QueueParams::new(lambda, mu, k, 1.0, 0.0, 1.0, 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("mu", self.mu)?;
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        for (name, c) in [("c1", self.c1), ("c2", self.c2)] {
            if !(c.is_finite() && c >= 0.0) {
                return Err(invalid(format!("{name} must be nonnegative, got {c}")));
            }
        }
        if (self.c1 + self.c2 - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("c1 + c2 must equal 1, got {}", self.c1 + self.c2)));
        }
        if !(self.alpha1 > 0.0 && self.alpha1 <= 1.0) {
            return Err(invalid(format!("alpha1 must lie in (0, 1], got {}", self.alpha1)));
        }
        if !(self.alpha2 > 0.0 && self.alpha2 < 1.0) {
            return Err(invalid(format!("alpha2 must lie in (0, 1), got {}", self.alpha2)));
        }
        if self.c1 > 0.0 && self.c2 > 0.0 && self.alpha2 >= self.alpha1 {
            return Err(invalid("alpha2 must be strictly smaller than alpha1 when both weights are positive"));
        }
        if self.alpha1 == 1.0 && self.c1 > 0.0 && self.c1 != 1.0 {
            return Err(invalid("alpha1 = 1 is only allowed together with c1 = 1"));
        }
        Ok(())
    }

    /// Total exit rate λ + kμ of a busy state.
    pub fn busy_rate(&self) -> f64 {
        self.lambda + self.phase_rate()
    }

    /// Phase completion rate kμ.
    pub fn phase_rate(&self) -> f64 {
        self.k as f64 * self.mu
    }

    /// The same model written with a nonzero leading weight: when c₁ = 0 the
    /// two stable components are swapped so that every formula dividing by
    /// c₁ stays defined.
    pub fn leading(&self) -> QueueParams {
        if self.c1 > 0.0 {
            *self
        } else {
            QueueParams { c1: self.c2, c2: 0.0, alpha1: self.alpha2, alpha2: self.alpha2, ..*self }
        }
    }

    /// Whether the second stable component contributes.
    pub fn is_mixed(&self) -> bool {
        self.c1 > 0.0 && self.c2 > 0.0
    }
}

/// The eight constants attached to one index tuple (n, s, i, m, r).
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConstants {
    pub a0: u64,
    pub A0: f64,
    pub B: f64,
    pub delta: u64,
    pub C: f64,
    pub nu: u64,
    pub D: f64,
    pub pi_: u64,
}

/// Exponent a⁰ = m + r(k+1).
pub fn exponent_a0(m: u64, r: u64, k: u32) -> u64 {
    m + r * (k as u64 + 1)
}

/// ln A⁰_{m,r} with A⁰ = m λ^r (kμ)^{m+rk−1} (m+r(k+1)−1)! / (r! (m+rk)!).
pub fn ln_coefficient_a(m: u64, r: u64, q: &QueueParams) -> f64 {
    let (m, r, k) = (m as f64, r as f64, q.k as f64);
    m.ln() + r * q.lambda.ln() + (m + r * k - 1.0) * q.phase_rate().ln() + ln_gamma(m + r * (k + 1.0))
        - ln_gamma(r + 1.0)
        - ln_gamma(m + r * k + 1.0)
}

/// Exponent δ^{n,s}_i = n − s + (i+1)(k+1).
pub fn exponent_delta(n: u64, s: u32, i: u64, k: u32) -> u64 {
    n + (i + 1) * (k as u64 + 1) - s as u64
}

/// ln B^{n,s}_i with B = λ^{n+i} (kμ)^{k(i+1)−s} (n+k−s+i(k+1))! / ((k(i+1)−s)! (n+i)!).
pub fn ln_coefficient_b(n: u64, s: u32, i: u64, q: &QueueParams) -> f64 {
    let (n, s, i, k) = (n as f64, s as f64, i as f64, q.k as f64);
    let phases = k * (i + 1.0) - s;
    (n + i) * q.lambda.ln() + phases * q.phase_rate().ln() + ln_gamma(n + k - s + i * (k + 1.0) + 1.0)
        - ln_gamma(phases + 1.0)
        - ln_gamma(n + i + 1.0)
}

/// The state that follows (n, s) by one phase completion in the index
/// convention of the D/π constants: (n, s+1) for s < k, (n+1, 1) for s = k.
pub fn successor_index(n: u64, s: u32, k: u32) -> (u64, u32) {
    if s < k {
        (n, s + 1)
    } else {
        (n + 1, 1)
    }
}

fn checked_exp(ln: f64, what: &str) -> Result<f64> {
    let v = ln.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!("{what} = exp({ln}) exceeds the double range")))
    }
}

/// The pair (a⁰_{m,r}, A⁰_{m,r}).
#[allow(non_snake_case)]
pub fn coeff_a0_A0(m: u64, r: u64, q: &QueueParams) -> Result<(u64, f64)> {
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    Ok((exponent_a0(m, r, q.k), checked_exp(ln_coefficient_a(m, r, q), "A0")?))
}

/// All constants for one index tuple.
pub fn coeff_block(n: u64, s: u32, i: u64, m: u64, r: u64, q: &QueueParams) -> Result<SeriesConstants> {
    if n == 0 || s == 0 || s > q.k {
        return Err(invalid(format!("(n, s) = ({n}, {s}) is not a busy state for k = {}", q.k)));
    }
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    let k = q.k;
    let a0 = exponent_a0(m, r, k);
    let ln_a = ln_coefficient_a(m, r, q);
    let ln_b = ln_coefficient_b(n, s, i, q);
    let (n2, s2) = successor_index(n, s, k);
    let ln_b2 = ln_coefficient_b(n2, s2, i, q);
    let ln_rate = q.phase_rate().ln();
    let delta = exponent_delta(n, s, i, k);
    Ok(SeriesConstants {
        a0,
        A0: checked_exp(ln_a, "A0")?,
        B: checked_exp(ln_b, "B")?,
        delta,
        C: checked_exp(ln_rate + ln_b + ln_a, "C")?,
        nu: delta + a0,
        D: checked_exp(ln_rate + ln_b2 + ln_a, "D")?,
        pi_: exponent_delta(n2, s2, i, k) + a0,
    })
}

/// Inverse Laplace transform of `z^{ρ−1} / (z^{α₁} + a z^{α₂} + b)^N` at
/// `t`, expanded in powers of `a`:
///
/// ```text
/// Σ_h (−a)^h (N)_h / h! · t^{β_h−1} E^{N+h}_{α₁,β_h}(−b t^{α₁}),
/// β_h = α₁N + (α₁−α₂)h − ρ + 1.
/// ```
///
/// The expansion is cancellation-free for `a = 0`. When the `h` terms
/// cancel heavily (large `a t^{α₁−α₂}`) the transform is inverted directly
/// along a hyperbolic contour instead.
pub(crate) fn prabhakar_power(q: &QueueParams, rho: f64, power: u64, b: f64, t: f64, eps: f64) -> Result<(f64, f64)> {
    let q = q.leading();
    match prabhakar_power_series(&q, rho, power, b, t, eps) {
        Ok((sum, err, gross)) if gross <= MAX_CANCELLATION * sum.abs() => Ok((sum, err)),
        _ => Ok(prabhakar_power_contour(&q, rho, power, b, t)),
    }
}

/// Largest tolerated ratio of the absolute to the signed sum of the h-series.
const MAX_CANCELLATION: f64 = 1e3;

/// Direct Bromwich inversion of `z^{ρ−1}/(z^{α₁}+a z^{α₂}+b)^N`.
fn prabhakar_power_contour(q: &QueueParams, rho: f64, power: u64, b: f64, t: f64) -> (f64, f64) {
    let a = q.c2 / q.c1;
    let n = power as f64;
    let v = invert_log(t, DEFAULT_NODES, |_, lz| {
        let mut d = (q.alpha1 * lz).exp() + b;
        if a > 0.0 {
            d += a * (q.alpha2 * lz).exp();
        }
        (rho - 1.0) * lz - n * d.ln()
    });
    (v.value(), v.error())
}

/// The h-series, returning the sum, its error and the sum of magnitudes.
fn prabhakar_power_series(q: &QueueParams, rho: f64, power: u64, b: f64, t: f64, eps: f64) -> Result<(f64, f64, f64)> {
    let a = q.c2 / q.c1;
    let (a1, a2) = (q.alpha1, q.alpha2);
    let x = -b * t.powf(a1);
    let nf = power as f64;
    let ln_t = t.ln();
    let ln_a = if a > 0.0 { a.ln() } else { f64::NEG_INFINITY };
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut err = 0.0;
    let mut small_run = 0;
    let mut ln_pochhammer = 0.0;
    let mut last;
    for h in 0..crate::specfun::SERIES_CAP as u64 {
        let hf = h as f64;
        if h > 0 {
            ln_pochhammer += (nf + hf - 1.0).ln() - hf.ln();
        }
        let beta = a1 * nf + (a1 - a2) * hf - rho + 1.0;
        let (e, _) = ml3_scaled(&MLParams { alpha: a1, beta, gamma: nf + hf }, x)?;
        let ln_pref = ln_pochhammer + if h == 0 { 0.0 } else { hf * ln_a } + (beta - 1.0) * ln_t;
        let sign = if h % 2 == 1 { -1.0 } else { 1.0 };
        let term = sign * e.scaled_by_ln(ln_pref).value();
        let term_err = e.scaled_by_ln(ln_pref).error();
        sum += term;
        abs_sum += term.abs();
        err += term_err;
        last = term.abs();
        if a == 0.0 {
            break;
        }
        if abs_sum > MAX_CANCELLATION * sum.abs() && h >= 8 && last > eps * abs_sum {
            return Err(Error::Numerical(format!("kernel series cancels at t = {t}")));
        }
        if term.abs() < eps * sum.abs() {
            small_run += 1;
            if small_run == 3 {
                break;
            }
        } else {
            small_run = 0;
        }
        if h + 1 == crate::specfun::SERIES_CAP as u64 {
            return Err(Error::NonConvergence { terms: h as usize + 1, last_term: last });
        }
    }
    if !sum.is_finite() {
        return Err(Error::Numerical(format!("kernel series overflowed at t = {t}")));
    }
    Ok((sum, err + 4.0 * f64::EPSILON * abs_sum, abs_sum))
}

/// Kernel shift `ρ` such that the single-factor transform is
/// `z^{ρ−1}/(z^{α₁}+a z^{α₂}+b)`.
fn kernel_rho(order_minus_one: f64, n: u64) -> f64 {
    1.0 + order_minus_one / n as f64
}

fn check_kernel_args(n: u64, t: f64) -> Result<()> {
    if n == 0 {
        return Err(invalid("kernel order N must be at least 1"));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid(format!("kernels are evaluated at t > 0 only, got {t}")));
    }
    Ok(())
}

/// The kernel f_N: inverse transform of `z^{(α₁−1)/N}/(z^{α₁}+(c₂/c₁)z^{α₂}+(λ+kμ)/c₁)`.
pub fn kernel_f(n: u64, t: f64, q: &QueueParams) -> Result<f64> {
    check_kernel_args(n, t)?;
    let l = q.leading();
    prabhakar_power(&l, kernel_rho(l.alpha1 - 1.0, n), 1, l.busy_rate() / l.c1, t, 1e-15).map(|v| v.0)
}

/// The kernel g_N, with `(α₂−1)/N` in place of `(α₁−1)/N`.
pub fn kernel_g(n: u64, t: f64, q: &QueueParams) -> Result<f64> {
    check_kernel_args(n, t)?;
    let l = q.leading();
    prabhakar_power(&l, kernel_rho(l.alpha2 - 1.0, n), 1, l.busy_rate() / l.c1, t, 1e-15).map(|v| v.0)
}

/// The kernel h_N of the mean queue length: numerator `z^{−1/N}`.
pub fn kernel_h(n: u64, t: f64, q: &QueueParams) -> Result<f64> {
    check_kernel_args(n, t)?;
    let l = q.leading();
    prabhakar_power(&l, kernel_rho(-1.0, n), 1, l.busy_rate() / l.c1, t, 1e-15).map(|v| v.0)
}

/// Power-law exponent of a kernel at the origin: kernel(t) ~ t^p.
pub fn kernel_endpoint_exponent(rho: f64, power: u64, alpha1: f64) -> f64 {
    alpha1 * power as f64 - rho
}

/// A signed number stored as `sign · exp(ln_abs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: f64,
    pub ln_abs: f64,
    /// ln of the sum of absolute values that produced this entry.
    pub ln_gross: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog { sign: 0.0, ln_abs: f64::NEG_INFINITY, ln_gross: f64::NEG_INFINITY };

    fn from_terms(terms: &[(f64, f64)]) -> SignedLog {
        let scale = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        if !scale.is_finite() {
            return SignedLog::ZERO;
        }
        let mut sum = 0.0;
        let mut gross = 0.0;
        for &(sign, ln) in terms {
            let v = (ln - scale).exp();
            sum += sign * v;
            gross += v;
        }
        if sum == 0.0 {
            return SignedLog { sign: 0.0, ln_abs: f64::NEG_INFINITY, ln_gross: scale + gross.ln() };
        }
        SignedLog { sign: sum.signum(), ln_abs: scale + sum.abs().ln(), ln_gross: scale + gross.ln() }
    }
}

/// Weights ω_N of a series Σ_N ω_N · X_N in which X_N is the N-fold
/// kernel power (time domain) or `(λ+kμ+φ(z))^{−N}` (Laplace domain).
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSeries {
    /// Entry `j` holds the weight of exponent `j`.
    pub weights: Vec<SignedLog>,
}

impl ExponentSeries {
    pub fn max_order(&self) -> usize {
        self.weights.len().saturating_sub(1)
    }

    pub fn min_order(&self) -> Option<usize> {
        self.weights.iter().position(|w| w.sign != 0.0)
    }

    fn from_buckets(buckets: Vec<Vec<(f64, f64)>>) -> ExponentSeries {
        ExponentSeries { weights: buckets.iter().map(|b| SignedLog::from_terms(b)).collect() }
    }

    /// Weights of the zero-state probability: ω_N = Σ_{a⁰(m,r)=N} A⁰_{m,r}.
    pub fn p0(q: &QueueParams, pol: &TruncationPolicy) -> ExponentSeries {
        let w = p0_log_weights(q, pol);
        ExponentSeries::from_buckets(w.iter().map(|&v| if v.is_finite() { vec![(1.0, v)] } else { vec![] }).collect())
    }

    /// Weights of the state probability p_{n,s}.
    pub fn pns(n: u64, s: u32, q: &QueueParams, pol: &TruncationPolicy) -> ExponentSeries {
        let max = pol.max_order();
        let k = q.k;
        let w0 = p0_log_weights(q, pol);
        let ln_rate = q.phase_rate().ln();
        let (n2, s2) = successor_index(n, s, k);
        let mut buckets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); max + 1];
        for i in 0..=pol.max_i as u64 {
            let d1 = exponent_delta(n, s, i, k) as usize;
            let d2 = exponent_delta(n2, s2, i, k) as usize;
            if d1.min(d2) > max {
                break;
            }
            let b1 = ln_coefficient_b(n, s, i, q);
            let b2 = ln_coefficient_b(n2, s2, i, q);
            if d1 <= max {
                buckets[d1].push((1.0, b1));
            }
            for (order, ln_w) in w0.iter().enumerate() {
                if !ln_w.is_finite() {
                    continue;
                }
                if d1 + order <= max {
                    buckets[d1 + order].push((1.0, ln_rate + b1 + ln_w));
                }
                if d2 + order <= max {
                    buckets[d2 + order].push((-1.0, ln_rate + b2 + ln_w));
                }
            }
        }
        ExponentSeries::from_buckets(buckets)
    }

    /// Weights of the busy-period CDF: ω_{k+h(k+1)} = kμ A⁰_{k,h}.
    pub fn busy(q: &QueueParams, pol: &TruncationPolicy) -> ExponentSeries {
        let max = pol.max_order();
        let mut buckets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); max + 1];
        let ln_rate = q.phase_rate().ln();
        for h in 0..=pol.max_r as u64 {
            let order = exponent_a0(q.k as u64, h, q.k) as usize;
            if order > max {
                break;
            }
            buckets[order].push((1.0, ln_rate + ln_coefficient_a(q.k as u64, h, q)));
        }
        ExponentSeries::from_buckets(buckets)
    }

    /// The p₀ weights multiplied by kμ (second term of the mean length).
    pub fn mean(q: &QueueParams, pol: &TruncationPolicy) -> ExponentSeries {
        let mut s = ExponentSeries::p0(q, pol);
        let ln_rate = q.phase_rate().ln();
        for w in &mut s.weights {
            if w.sign != 0.0 {
                w.ln_abs += ln_rate;
                w.ln_gross += ln_rate;
            }
        }
        s
    }
}

/// ln ω_N for p₀, indexed by N (−∞ where empty).
///
/// Every state series of a queue convolves the same table, so the most
/// recent one is kept per thread.
fn p0_log_weights(q: &QueueParams, pol: &TruncationPolicy) -> Rc<[f64]> {
    type Entry = ((QueueParams, TruncationPolicy), Rc<[f64]>);
    thread_local! {
        static LAST: RefCell<Option<Entry>> = const { RefCell::new(None) };
    }
    LAST.with(|last| {
        let mut last = last.borrow_mut();
        if let Some((key, table)) = last.as_ref() {
            if key == &(*q, *pol) {
                return Rc::clone(table);
            }
        }
        let table: Rc<[f64]> = compute_p0_log_weights(q, pol).into();
        *last = Some(((*q, *pol), Rc::clone(&table)));
        table
    })
}

fn compute_p0_log_weights(q: &QueueParams, pol: &TruncationPolicy) -> Vec<f64> {
    let max = pol.max_order();
    let step = q.k as usize + 1;
    let mut out = vec![f64::NEG_INFINITY; max + 1];
    for (order, slot) in out.iter_mut().enumerate().skip(1) {
        let mut terms = Vec::new();
        let mut r = 0usize;
        while r * step < order && r <= pol.max_r {
            let m = order - r * step;
            if m <= pol.max_m {
                terms.push((1.0, ln_coefficient_a(m as u64, r as u64, q)));
            }
            r += 1;
        }
        let sl = SignedLog::from_terms(&terms);
        if sl.sign != 0.0 {
            *slot = sl.ln_abs;
        }
    }
    out
}

/// Sum `Σ_N ω_N X_N` where `x(N)` returns `X_N` in log-scaled form.
///
/// The tail after a contribution `c` is estimated geometrically as
/// `|c| ρ/(1−ρ)`, with `ρ` the ratio of the last two contribution
/// magnitudes; summation stops once this estimate stays below
/// `eps · |sum|` for three consecutive contributions. The returned error
/// adds the rounding estimate to the tail estimate.
pub(crate) fn sum_exponent_series<F>(series: &ExponentSeries, eps: f64, mut x: F) -> Result<SeriesSum>
where
    F: FnMut(usize) -> Result<LogScaled>,
{
    let mut sum = 0.0f64;
    let mut rounding = 0.0f64;
    let mut small_run = 0;
    let mut previous: Option<f64> = None;
    let mut tail = f64::INFINITY;
    for (order, w) in series.weights.iter().enumerate() {
        if w.sign == 0.0 {
            continue;
        }
        let xn = x(order)?;
        let gross = (w.ln_gross + xn.ln_scale).exp();
        let term = if xn.mantissa == 0.0 { 0.0 } else { w.sign * xn.mantissa * (w.ln_abs + xn.ln_scale).exp() };
        rounding += xn.rounding * gross + 4.0 * f64::EPSILON * gross * xn.mantissa.abs();
        sum += term;
        let mag = term.abs();
        tail = match previous {
            Some(p) if p > 0.0 && mag < p => {
                let ratio = mag / p;
                mag * ratio / (1.0 - ratio)
            }
            Some(_) => f64::INFINITY,
            None => f64::INFINITY,
        };
        if mag == 0.0 && previous.is_some() {
            tail = 0.0;
        }
        previous = Some(mag);
        if tail <= eps * sum.abs() {
            small_run += 1;
            if small_run >= 3 {
                return Ok(SeriesSum { value: sum, error: rounding + tail, converged: true });
            }
        } else {
            small_run = 0;
        }
    }
    let tail = if tail.is_finite() { tail } else { previous.unwrap_or(0.0) };
    Ok(SeriesSum { value: sum, error: rounding + tail, converged: tail <= eps * sum.abs() })
}

/// Outcome of a truncated exponent series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SeriesSum {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn a0_examples() {
        let q = QueueParams::baseline();
        assert_eq!(coeff_a0_A0(1, 0, &q).unwrap(), (1, 1.0));
        assert_eq!(exponent_a0(2, 3, 4), 17);
        let (a0, a) = coeff_a0_A0(1, 1, &q).unwrap();
        assert_eq!(a0, 6);
        assert_relative_eq!(a, 960_000.0, max_relative = 1e-12);
    }

    #[test]
    fn block_examples() {
        let q = QueueParams::baseline();
        let c = coeff_block(1, 1, 0, 1, 0, &q).unwrap();
        assert_eq!(c.delta, 5);
        let c = coeff_block(1, 4, 0, 1, 0, &q).unwrap();
        assert_eq!(c.pi_, exponent_delta(2, 1, 0, 4) + 1);
        let c = coeff_block(2, 3, 1, 1, 0, &q).unwrap();
        assert_eq!(c.delta, 9);
        // 6^3 · 20^5 · 8! / (5! · 3!)
        assert_relative_eq!(c.B, 38_707_200_000.0, max_relative = 1e-12);
        assert_relative_eq!(c.C, q.phase_rate() * c.B * c.A0, max_relative = 1e-12);
        assert_eq!(c.nu, c.delta + c.a0);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(QueueParams::new(6.0, 5.0, 4, 0.5, 0.6, 0.5, 0.3).is_err());
        assert!(QueueParams::new(6.0, 5.0, 4, 0.4, 0.6, 0.3, 0.5).is_err());
        assert!(QueueParams::new(6.0, 5.0, 4, 0.4, 0.6, 1.0, 0.3).is_err());
        assert!(QueueParams::new(6.0, 5.0, 0, 0.4, 0.6, 0.5, 0.3).is_err());
        assert!(QueueParams::classical(6.0, 5.0, 4).is_ok());
    }

    #[test]
    fn kernel_classical_reductions() {
        let q = QueueParams::classical(6.0, 5.0, 4).unwrap();
        let b = q.busy_rate();
        for &t in &[0.05, 0.5, 2.0] {
            assert_relative_eq!(kernel_f(1, t, &q).unwrap(), (-b * t).exp(), max_relative = 1e-12);
            assert_relative_eq!(kernel_h(1, t, &q).unwrap(), (1.0 - (-b * t).exp()) / b, max_relative = 1e-12);
        }
    }

    #[test]
    fn weights_are_grouped_by_exponent() {
        let q = QueueParams::baseline();
        let pol = TruncationPolicy::default();
        let s = ExponentSeries::p0(&q, &pol);
        assert_eq!(s.min_order(), Some(1));
        // exponent 6 collects (m, r) = (6, 0) and (1, 1)
        let expected = (ln_coefficient_a(6, 0, &q).exp() + 960_000.0).ln();
        assert_relative_eq!(s.weights[6].ln_abs, expected, max_relative = 1e-13);
        let busy = ExponentSeries::busy(&q, &pol);
        assert_eq!(busy.min_order(), Some(4));
        assert_eq!(busy.weights[5].sign, 0.0);
    }
}
