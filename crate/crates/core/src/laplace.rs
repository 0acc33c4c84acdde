//! Closed-form Laplace transforms of the queue quantities and a
//! fixed-Talbot inversion used as an independent oracle.
//!
//! Every transform is written once for complex `z` (principal branches of
//! `z^α`); the real-valued entry points evaluate the same code at `z + 0i`.

use crate::analytic::{survival_at, TruncationPolicy};
use crate::coeffs::{ExponentSeries, QueueParams};
use crate::error::{invalid, Error, Result};
use crate::specfun::ln_gamma;
use num_complex::Complex64;
use statrs::function::gamma::gamma_ur;
use std::f64::consts::PI;

/// Default number of Talbot nodes. In double precision the fixed-Talbot
/// rule reaches about 1e-12 at 32 nodes and degrades beyond that, since
/// `e^{rt}` grows like `e^{0.4 M}`.
pub const TALBOT_NODES: usize = 32;

/// Contour inversion multiplies transform errors by up to `e^{rt}`, so the
/// transform series is summed well past the time-domain tolerance.
const TRANSFORM_EPS: f64 = 1e-15;

/// A real transform value at a real point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LTPoint {
    pub z: f64,
    pub value: f64,
}

fn check_z(z: f64) -> Result<()> {
    if z.is_finite() && z > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("transform variable must be positive, got {z}")))
    }
}

fn cpow(z: Complex64, p: f64) -> Complex64 {
    if z.im == 0.0 && z.re > 0.0 {
        Complex64::new(z.re.powf(p), 0.0)
    } else {
        (p * z.ln()).exp()
    }
}

/// φ(z) = c₁z^{α₁} + c₂z^{α₂}, the Laplace exponent of the mixed
/// subordinator.
pub fn phi_mix(z: f64, q: &QueueParams) -> f64 {
    phi_c(Complex64::from(z), q).re
}

pub(crate) fn phi_c(z: Complex64, q: &QueueParams) -> Complex64 {
    let mut v = q.c1 * cpow(z, q.alpha1);
    if q.c2 > 0.0 {
        v += q.c2 * cpow(z, q.alpha2);
    }
    v
}

/// Φ(z) = φ(z)/z = c₁z^{α₁−1} + c₂z^{α₂−1}.
fn mix_over_z(z: Complex64, q: &QueueParams) -> Complex64 {
    phi_c(z, q) / z
}

/// Transform of `S(t)` for an exponential clock of rate θ: Φ(z)/(θ + φ(z)).
pub fn event_survival_c(theta: f64, z: Complex64, q: &QueueParams) -> Complex64 {
    mix_over_z(z, q) / (theta + phi_c(z, q))
}

pub fn lt_event_survival(theta: f64, z: f64, q: &QueueParams) -> Result<f64> {
    check_z(z)?;
    if !(theta > 0.0) {
        return Err(invalid(format!("theta must be positive, got {theta}")));
    }
    q.validate()?;
    Ok(event_survival_c(theta, Complex64::from(z), q).re)
}

/// Transform of the service density: (kμ/(kμ+φ(z)))^k.
pub fn service_c(z: Complex64, q: &QueueParams) -> Complex64 {
    let rate = q.phase_rate();
    (rate / (rate + phi_c(z, q))).powu(q.k)
}

pub fn lt_service(z: f64, q: &QueueParams) -> Result<f64> {
    check_z(z)?;
    q.validate()?;
    Ok(service_c(Complex64::from(z), q).re)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Numerator {
    Mix,
    Step,
}

/// A transform of the form `numerator(z) · Σ_N ω_N (λ+kμ+φ(z))^{−N}`.
#[derive(Debug, Clone)]
pub struct LaplaceSeries {
    q: QueueParams,
    weights: ExponentSeries,
    numerator: Numerator,
    eps: f64,
    /// Extra term `drift / (c₁z^{α₁+1}+c₂z^{α₂+1})` of the mean length.
    drift: Option<f64>,
}

impl LaplaceSeries {
    pub fn p0(q: &QueueParams, pol: &TruncationPolicy) -> Result<LaplaceSeries> {
        Self::build(q, pol, Numerator::Mix, None, ExponentSeries::p0)
    }

    pub fn pns(n: u64, s: u32, q: &QueueParams, pol: &TruncationPolicy) -> Result<LaplaceSeries> {
        if n == 0 || s == 0 || s > q.k {
            return Err(invalid(format!("(n, s) = ({n}, {s}) is not a busy state for k = {}", q.k)));
        }
        Self::build(q, pol, Numerator::Mix, None, |q, pol| ExponentSeries::pns(n, s, q, pol))
    }

    pub fn mean(q: &QueueParams, pol: &TruncationPolicy) -> Result<LaplaceSeries> {
        let drift = q.k as f64 * (q.lambda - q.mu);
        Self::build(q, pol, Numerator::Step, Some(drift), ExponentSeries::mean)
    }

    pub fn busy(q: &QueueParams, pol: &TruncationPolicy) -> Result<LaplaceSeries> {
        Self::build(q, pol, Numerator::Step, None, ExponentSeries::busy)
    }

    fn build(
        q: &QueueParams,
        pol: &TruncationPolicy,
        numerator: Numerator,
        drift: Option<f64>,
        weights: impl Fn(&QueueParams, &TruncationPolicy) -> ExponentSeries,
    ) -> Result<LaplaceSeries> {
        q.validate()?;
        pol.validate()?;
        let q = q.leading();
        Ok(LaplaceSeries { weights: weights(&q, pol), q, numerator, eps: pol.eps_rel.min(TRANSFORM_EPS), drift })
    }

    /// Evaluates the transform at complex `z` (principal branch).
    pub fn eval_c(&self, z: Complex64) -> Result<Complex64> {
        let q = &self.q;
        let phi = phi_c(z, q);
        let ln_d = (q.busy_rate() + phi).ln();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut small_run = 0;
        let mut previous: Option<f64> = None;
        let mut converged = false;
        let mut last = 0.0;
        for (order, w) in self.weights.weights.iter().enumerate() {
            if w.sign == 0.0 {
                continue;
            }
            let term = w.sign * (w.ln_abs - order as f64 * ln_d).exp();
            sum += term;
            let mag = term.norm();
            last = mag;
            let tail = match previous {
                Some(p) if mag < p => {
                    let ratio = mag / p;
                    mag * ratio / (1.0 - ratio)
                }
                _ => f64::INFINITY,
            };
            previous = Some(mag);
            if tail <= self.eps * sum.norm() {
                small_run += 1;
                if small_run >= 3 {
                    converged = true;
                    break;
                }
            } else {
                small_run = 0;
            }
        }
        if !converged && last > 1e3 * self.eps * sum.norm() {
            return Err(Error::NonConvergence { terms: self.weights.weights.len(), last_term: last });
        }
        let numerator = match self.numerator {
            Numerator::Mix => phi / z,
            Numerator::Step => z.inv(),
        };
        let mut value = numerator * sum;
        if let Some(drift) = self.drift {
            value += drift / (phi * z);
        }
        Ok(value)
    }

    pub fn eval(&self, z: f64) -> Result<f64> {
        check_z(z)?;
        Ok(self.eval_c(Complex64::from(z))?.re)
    }
}

pub fn lt_p0(z: f64, q: &QueueParams) -> Result<f64> {
    LaplaceSeries::p0(q, &TruncationPolicy::default())?.eval(z)
}

pub fn lt_pns(n: u64, s: u32, z: f64, q: &QueueParams) -> Result<f64> {
    LaplaceSeries::pns(n, s, q, &TruncationPolicy::default())?.eval(z)
}

pub fn lt_mean(z: f64, q: &QueueParams) -> Result<f64> {
    LaplaceSeries::mean(q, &TruncationPolicy::default())?.eval(z)
}

pub fn lt_busy(z: f64, q: &QueueParams) -> Result<f64> {
    LaplaceSeries::busy(q, &TruncationPolicy::default())?.eval(z)
}

/// Transform of the density of the time until the `n`-th next phase
/// completion, given that the current phase started `t − t0` time units
/// ago and has not completed:
///
/// ```text
/// (kμ/(kμ+φ(z)))^{n−1} · (1 − z e^{zτ} ∫_τ^∞ e^{−zy} ψ(y) dy / ψ(τ)),  τ = t − t0,
/// ```
///
/// where ψ is the inter-phase survival function. The integral is taken
/// from its double power series in incomplete gamma functions when that
/// series converges, and otherwise by quadrature.
pub fn lt_waiting(z: f64, q: &QueueParams, t: f64, t0: f64, n: u64) -> Result<f64> {
    check_z(z)?;
    q.validate()?;
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if !(t0 >= 0.0 && t0 < t && t.is_finite()) {
        return Err(invalid(format!("need 0 <= t0 < t, got t0 = {t0}, t = {t}")));
    }
    let tau = t - t0;
    let psi = survival_at(q.phase_rate(), tau, q)?.value;
    if !(psi > 1e-300) {
        return Err(Error::Numerical(format!("inter-phase survival underflows at {tau}")));
    }
    let bracket = match waiting_series(z, q, tau) {
        Ok(v) => v,
        Err(_) => waiting_quadrature(z, q, tau)?,
    };
    let rate = q.phase_rate();
    let lead = (rate / (rate + phi_mix(z, q))).powi(n as i32 - 1);
    Ok(lead * (1.0 - bracket / psi))
}

/// `z e^{zτ} ∫_τ^∞ e^{−zy} ψ(y) dy` from the double series
/// `Σ_{r,m} (−a)^r (−kμ/c₁)^m C(m+r, r) Q(p+1, zτ) z^{−p}` (minus the
/// companion sum with r+1), where `Q` is the regularized upper incomplete
/// gamma function and `p = (α₁−α₂)r + α₁m`.
///
/// Since `0 ≤ Q ≤ 1`, the terms of total degree `r+m = d` are bounded by
/// `ρ^d` with `ρ = a z^{α₂−α₁} + (kμ/c₁) z^{−α₁}`; the series is used only
/// when `ρ < 0.9`.
pub(crate) fn waiting_series(z: f64, q: &QueueParams, tau: f64) -> Result<f64> {
    let q = q.leading();
    let a = q.c2 / q.c1;
    let g = q.phase_rate() / q.c1;
    let d = q.alpha1 - q.alpha2;
    let rho = if a > 0.0 { a * z.powf(-d) } else { 0.0 } + g * z.powf(-q.alpha1);
    if rho >= 0.9 {
        return Err(Error::NonConvergence { terms: 0, last_term: rho });
    }
    let x = z * tau;
    let growth = x.exp();
    let ln_z = z.ln();
    let term = |r: u64, m: u64, shift: u64| -> f64 {
        let p = d * (r + shift) as f64 + q.alpha1 * m as f64;
        let ln_binom = ln_gamma((m + r + 1) as f64) - ln_gamma((r + 1) as f64) - ln_gamma((m + 1) as f64);
        let ln_a = if r + shift == 0 { 0.0 } else { (r + shift) as f64 * a.ln() };
        let ln_mag = ln_binom + ln_a + m as f64 * g.ln() - p * ln_z;
        let reg = if x == 0.0 { 1.0 } else { gamma_ur(p + 1.0, x) };
        let sign = if (r + shift + m) % 2 == 1 { -1.0 } else { 1.0 };
        sign * ln_mag.exp() * reg * growth
    };
    let degrees = ((1e-17f64).ln() / rho.ln()).ceil().max(1.0) as u64;
    let mut sum = 0.0;
    for degree in 0..=degrees {
        for r in 0..=degree {
            let m = degree - r;
            sum += term(r, m, 0);
            if a > 0.0 {
                sum -= term(r, m, 1);
            }
        }
    }
    Ok(sum)
}

/// `z ∫_0^∞ e^{−zu} ψ(τ + u) du` by exp-sinh quadrature, which tolerates
/// the power-law cusp of ψ at the origin.
pub(crate) fn waiting_quadrature(z: f64, q: &QueueParams, tau: f64) -> Result<f64> {
    let rate = q.phase_rate();
    let step = 1.0 / 24.0;
    let mut acc = 0.0;
    let mut j = -150i32;
    while j <= 150 {
        let v = j as f64 * step;
        let u = (0.5 * PI * v.sinh()).exp() / z;
        let jac = u * 0.5 * PI * v.cosh();
        let decay = (-z * u).exp();
        if decay > 0.0 && jac > 0.0 {
            acc += decay * jac * survival_at(rate, tau + u, q)?.value;
        }
        j += 1;
    }
    Ok(z * acc * step)
}

/// Numerical inverse Laplace transform at `t` by the fixed-Talbot rule
/// with [`TALBOT_NODES`] nodes.
pub fn invert_lt<F>(f: F, t: f64) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    invert_lt_with(f, t, TALBOT_NODES)
}

/// Fixed-Talbot inversion with `m` nodes: contour
/// `s(θ) = rθ(cot θ + i)`, `r = 2m/(5t)`.
pub fn invert_lt_with<F>(f: F, t: f64, m: usize) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid(format!("inversion time must be positive, got {t}")));
    }
    if m < 2 {
        return Err(invalid("Talbot rule needs at least two nodes"));
    }
    let mf = m as f64;
    let r = 2.0 * mf / (5.0 * t);
    let oracle = |e: Error| Error::Numerical(format!("transform evaluation failed on the Talbot contour: {e}"));
    let f0 = f(Complex64::new(r, 0.0)).map_err(oracle)?;
    let mut acc = 0.5 * (f0 * (r * t).exp()).re;
    for k in 1..m {
        let theta = k as f64 * PI / mf;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let fs = f(s).map_err(oracle)?;
        acc += ((s * t).exp() * fs * Complex64::new(1.0, sigma)).re;
    }
    let v = r / mf * acc;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("Talbot inversion produced {v} at t = {t}")))
    }
}
