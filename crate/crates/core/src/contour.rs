//! Bromwich inversion along a Weideman–Trefethen hyperbola, carried out in
//! log space so that transforms of the form `z^p / D(z)^N` with very large
//! `N` stay representable.
//!
//! The contour is `z(u) = m (1 + sin(i u − φ))` with the optimal constants
//! for functions analytic off the negative real axis; the trapezoid rule on
//! `u ∈ [0, ∞)` then converges like `exp(−1.17 n)`.

use num_complex::Complex64;
use std::f64::consts::PI;

const ANGLE: f64 = 1.1721;
const STEP: f64 = 1.0818;
const SCALE: f64 = 4.4921;

/// Default number of half-contour nodes.
pub(crate) const DEFAULT_NODES: usize = 16;

/// A value `mantissa · exp(ln_scale)` together with a rounding estimate
/// expressed in the same units as the mantissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScaled {
    pub mantissa: f64,
    pub ln_scale: f64,
    /// Absolute rounding estimate for the mantissa.
    pub rounding: f64,
}

impl LogScaled {
    pub const ZERO: LogScaled = LogScaled { mantissa: 0.0, ln_scale: 0.0, rounding: 0.0 };

    pub fn value(&self) -> f64 {
        if self.mantissa == 0.0 {
            0.0
        } else {
            self.mantissa * self.ln_scale.exp()
        }
    }

    pub fn error(&self) -> f64 {
        self.rounding * self.ln_scale.exp()
    }

    /// Natural log of `|value|`, `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.ln_scale
    }

    pub fn scaled_by_ln(self, ln_factor: f64) -> LogScaled {
        LogScaled { ln_scale: self.ln_scale + ln_factor, ..self }
    }
}

/// Nodes of the hyperbola for a fixed inversion time.
#[derive(Debug, Clone)]
pub(crate) struct Hyperbola {
    pub step: f64,
    pub z: Vec<Complex64>,
    pub ln_z: Vec<Complex64>,
    /// `z t + ln(dz/du)` at every node.
    pub ln_base: Vec<Complex64>,
}

impl Hyperbola {
    pub fn new(t: f64, nodes: usize) -> Hyperbola {
        Self::with_scale(t, nodes, SCALE * nodes as f64 / t)
    }

    /// Real-axis crossing of the contour built by [`Hyperbola::new`].
    pub fn default_crossing(t: f64, nodes: usize) -> f64 {
        SCALE * nodes as f64 / t * (1.0 - ANGLE.sin())
    }

    /// The same hyperbola moved so that it crosses the real axis at `crossing`.
    /// Used when the integrand has a saddle point far to the right of the
    /// default crossing.
    pub fn through(t: f64, nodes: usize, crossing: f64) -> Hyperbola {
        Self::with_scale(t, nodes, crossing / (1.0 - ANGLE.sin()))
    }

    /// Distance between neighbouring nodes where the contour crosses the
    /// real axis.
    pub fn spacing_at(crossing: f64, nodes: usize) -> f64 {
        crossing / (1.0 - ANGLE.sin()) * ANGLE.cos() * STEP / nodes as f64
    }

    fn with_scale(t: f64, nodes: usize, m: f64) -> Hyperbola {
        let step = STEP / nodes as f64;
        let mut z = Vec::with_capacity(nodes + 1);
        let mut ln_z = Vec::with_capacity(nodes + 1);
        let mut ln_base = Vec::with_capacity(nodes + 1);
        for j in 0..=nodes {
            let w = Complex64::new(-ANGLE, j as f64 * step);
            let zj = m * (1.0 + w.sin());
            let dz = m * w.cos();
            z.push(zj);
            ln_z.push(zj.ln());
            ln_base.push(zj * t + dz.ln());
        }
        Hyperbola { step, z, ln_z, ln_base }
    }

    /// Inverts a transform given through `ln F(z_j)` at every node index.
    pub fn invert_with<F: FnMut(usize) -> Complex64>(&self, mut ln_f: F) -> LogScaled {
        let exps: Vec<Complex64> = (0..self.z.len()).map(|j| self.ln_base[j] + ln_f(j)).collect();
        sum_nodes(&exps, self.step)
    }

    /// Like [`invert_with`](Self::invert_with), but also returns the size of
    /// the outermost node term relative to the result. A large ratio means
    /// the integrand has not decayed where the contour is cut off; the
    /// outermost term is then added to the error estimate.
    pub fn invert_with_tail<F: FnMut(usize) -> Complex64>(&self, mut ln_f: F) -> (LogScaled, f64) {
        let exps: Vec<Complex64> = (0..self.z.len()).map(|j| self.ln_base[j] + ln_f(j)).collect();
        let mut value = sum_nodes(&exps, self.step);
        let last = exps.last().map_or(f64::NEG_INFINITY, |e| e.re);
        if !last.is_finite() {
            return (value, 0.0);
        }
        let ratio = (last - value.ln_abs()).exp();
        value.rounding += (last - value.ln_scale).exp() * self.step / PI;
        (value, ratio)
    }
}

/// Trapezoid sum over the half contour given the log of every integrand
/// value. The node at `u = 0` carries half weight and conjugate symmetry
/// supplies the other half of the contour.
pub(crate) fn sum_nodes(exps: &[Complex64], step: f64) -> LogScaled {
    let scale = exps
        .iter()
        .map(|e| e.re)
        .filter(|r| r.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !scale.is_finite() {
        return LogScaled::ZERO;
    }
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    for (j, e) in exps.iter().enumerate() {
        if !e.re.is_finite() {
            continue;
        }
        let w = if j == 0 { 0.5 } else { 1.0 };
        let term = (e - scale).exp();
        sum += w * term.re;
        abs_sum += w * term.norm();
    }
    let factor = step / PI;
    LogScaled {
        mantissa: sum * factor,
        ln_scale: scale,
        rounding: 8.0 * f64::EPSILON * abs_sum * factor,
    }
}

/// Inverse transform at `t` of a function known through its logarithm.
pub(crate) fn invert_log<F: Fn(Complex64, Complex64) -> Complex64>(t: f64, nodes: usize, ln_f: F) -> LogScaled {
    let h = Hyperbola::new(t, nodes);
    h.invert_with(|j| ln_f(h.z[j], h.ln_z[j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_shifted_power() {
        // L^{-1}[1/(z+2)^3](t) = t^2 e^{-2t} / 2
        for &t in &[0.1, 1.0, 4.0] {
            let v = invert_log(t, DEFAULT_NODES, |z, _| -3.0 * (z + 2.0).ln()).value();
            let exact = t * t * (-2.0 * t).exp() / 2.0;
            assert!((v - exact).abs() < 1e-12 * exact.max(1e-3), "t={t} v={v} exact={exact}");
        }
    }

    #[test]
    fn inverts_fractional_power() {
        // L^{-1}[z^{-1/2}](t) = 1/sqrt(pi t)
        let t = 0.7;
        let v = invert_log(t, DEFAULT_NODES, |_, lz| -0.5 * lz).value();
        let exact = 1.0 / (PI * t).sqrt();
        assert!((v / exact - 1.0).abs() < 1e-12, "{}", v / exact - 1.0);
    }
}
