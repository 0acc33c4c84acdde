//! Scalar special functions: the three-parameter (Prabhakar) Mittag-Leffler
//! function and the upper incomplete gamma function.
//!
//! ```text
//! E^γ_{α,β}(x) = Σ_{r≥0} Γ(γ+r) x^r / (r! Γ(γ) Γ(αr+β))
//! ```
//!
//! Three evaluation routes are used:
//!
//! * the defining power series with compensated summation, whenever the
//!   terms do not grow far beyond the first one;
//! * for `α = 1` and `β ≥ γ`, Kummer's transformation, whose series has
//!   positive terms only;
//! * for `x < 0` and `α ≤ 1`, Bromwich inversion of the Laplace transform
//!   `s^{αγ−β} / (s^α − x)^γ` at unit time along a hyperbolic contour.

use crate::contour::{self, LogScaled};
use crate::error::{invalid, Error, Result};
use num_complex::Complex64;
use statrs::function::gamma::{gamma, gamma_ur, ln_gamma as statrs_ln_gamma};

/// Relative stopping tolerance for the power series.
pub const SERIES_EPS: f64 = 1e-17;
/// Maximum number of series terms.
pub const SERIES_CAP: usize = 10_000;
/// Terms larger than `exp(GROWTH_LIMIT)` times the leading term make the
/// alternating series useless in double precision.
const GROWTH_LIMIT: f64 = 4.6;

/// Parameters `(α, β, γ)` of the three-parameter Mittag-Leffler function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl MLParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<MLParams> {
        let p = MLParams { alpha, beta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("Mittag-Leffler {name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Which algorithm produced a Mittag-Leffler value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlMethod {
    Series,
    Kummer,
    Contour,
}

/// A Mittag-Leffler value with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlValue {
    pub value: f64,
    /// Absolute error estimate (accumulated rounding and cancellation).
    pub error: f64,
    pub method: MlMethod,
}

/// Natural logarithm of `Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    statrs_ln_gamma(x)
}

/// Three-parameter Mittag-Leffler function `E^γ_{α,β}(x)`.
pub fn mittag_leffler3(p: &MLParams, x: f64) -> Result<MlValue> {
    let (scaled, method) = ml3_scaled(p, x)?;
    Ok(MlValue { value: scaled.value(), error: scaled.error(), method })
}

/// `E^γ_{α,β}(x)` as a log-scaled value, so that tiny results of large-γ
/// functions survive multiplication by huge prefactors.
pub fn mittag_leffler3_scaled(p: &MLParams, x: f64) -> Result<LogScaled> {
    ml3_scaled(p, x).map(|(v, _)| v)
}

pub(crate) fn ml3_scaled(p: &MLParams, x: f64) -> Result<(LogScaled, MlMethod)> {
    p.validate()?;
    if !x.is_finite() {
        return Err(invalid(format!("Mittag-Leffler argument must be finite, got {x}")));
    }
    if x == 0.0 {
        let scaled = if p.beta < 170.0 {
            LogScaled { mantissa: 1.0 / gamma(p.beta), ln_scale: 0.0, rounding: f64::EPSILON }
        } else {
            LogScaled { mantissa: 1.0, ln_scale: -ln_gamma(p.beta), rounding: f64::EPSILON }
        };
        return Ok((scaled, MlMethod::Series));
    }
    if x > 0.0 {
        return series(p, x, false).map(|v| (v.expect("series without growth limit"), MlMethod::Series));
    }
    if p.alpha == 1.0 && p.beta >= p.gamma {
        return kummer(p, x).map(|v| (v, MlMethod::Kummer));
    }
    if let Some(v) = series(p, x, true)? {
        let relative = v.rounding / v.mantissa.abs();
        if relative < 1e-13 || p.alpha > 1.0 {
            return Ok((v, MlMethod::Series));
        }
    }
    if p.alpha > 1.0 {
        return Err(Error::Numerical(format!(
            "E^{}_{{{},{}}}({x}): alternating series loses all digits and no contour route exists for alpha > 1",
            p.gamma, p.alpha, p.beta
        )));
    }
    Ok((contour_route(p, x), MlMethod::Contour))
}

/// Kahan-compensated power series in log-scaled form. With `guarded`, the
/// summation is abandoned (returning `None`) once a term exceeds the first
/// one by more than `exp(GROWTH_LIMIT)`.
fn series(p: &MLParams, x: f64, guarded: bool) -> Result<Option<LogScaled>> {
    let ln_abs_x = x.abs().ln();
    let negative = x < 0.0;
    let ln_gamma_gamma = ln_gamma(p.gamma);
    let ln_term = |r: usize| -> f64 {
        let rf = r as f64;
        ln_gamma(p.gamma + rf) - ln_gamma(rf + 1.0) - ln_gamma_gamma + rf * ln_abs_x - ln_gamma(p.alpha * rf + p.beta)
    };
    let scale = ln_term(0);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut abs_sum = 0.0f64;
    let mut small_run = 0;
    for r in 0..SERIES_CAP {
        let lt = ln_term(r);
        if guarded && lt - scale > GROWTH_LIMIT {
            return Ok(None);
        }
        let mag = (lt - scale).exp();
        let term = if negative && r % 2 == 1 { -mag } else { mag };
        let y = term - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
        abs_sum += mag;
        if mag < SERIES_EPS * sum.abs() {
            small_run += 1;
            if small_run == 3 {
                return Ok(Some(LogScaled {
                    mantissa: sum,
                    ln_scale: scale,
                    rounding: 4.0 * f64::EPSILON * abs_sum,
                }));
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::NonConvergence { terms: SERIES_CAP, last_term: ln_term(SERIES_CAP - 1).exp() })
}

/// `E^γ_{1,β}(x) = e^x Σ_r (β−γ)_r (−x)^r / (r! Γ(β+r))`, valid for all x;
/// with `β ≥ γ` and `x < 0` every term is nonnegative.
fn kummer(p: &MLParams, x: f64) -> Result<LogScaled> {
    let c = p.beta - p.gamma;
    let y = -x;
    let scale = x - ln_gamma(p.beta);
    if c == 0.0 {
        return Ok(LogScaled { mantissa: 1.0, ln_scale: scale, rounding: f64::EPSILON });
    }
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut small_run = 0;
    for r in 0..SERIES_CAP {
        let rf = r as f64;
        term *= (c + rf) * y / ((rf + 1.0) * (p.beta + rf));
        sum += term;
        if term < SERIES_EPS * sum {
            small_run += 1;
            if small_run == 3 {
                return Ok(LogScaled { mantissa: 1.0, ln_scale: scale + sum.ln(), rounding: 4.0 * f64::EPSILON });
            }
        } else {
            small_run = 0;
        }
        if !sum.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence { terms: SERIES_CAP, last_term: term })
}

fn contour_route(p: &MLParams, x: f64) -> LogScaled {
    let power = p.alpha * p.gamma - p.beta;
    contour::invert_log(1.0, contour::DEFAULT_NODES, |_, ln_s| {
        let s_alpha = (p.alpha * ln_s).exp();
        power * ln_s - p.gamma * (s_alpha - Complex64::from(x)).ln()
    })
}

/// Upper incomplete gamma function `Γ(s, x) = ∫_x^∞ t^{s−1} e^{−t} dt`.
pub fn upper_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s.is_finite() && s > 0.0) {
        return Err(invalid(format!("incomplete gamma order must be positive, got {s}")));
    }
    if !(x.is_finite() && x >= 0.0) {
        return Err(invalid(format!("incomplete gamma argument must be nonnegative, got {x}")));
    }
    if x == 0.0 {
        return Ok(ln_gamma(s).exp());
    }
    let q = gamma_ur(s, x);
    if q == 0.0 {
        return Ok(0.0);
    }
    Ok((q.ln() + ln_gamma(s)).exp())
}
