//! Independent reference computations used by the validation checks.

use merlang_core::coeffs::{
    exponent_a0, exponent_delta, ln_coefficient_a, ln_coefficient_b, successor_index, QueueParams,
};
use merlang_core::specfun::{ln_gamma, mittag_leffler3_scaled, MLParams};
use merlang_core::Result as CoreResult;

/// The classical Erlang queue as a finite Markov chain on phase indices
/// `0..=k·max_customers`, solved by uniformization.
///
/// Arrivals that would leave the truncated space are dropped; the mass in
/// the top customer level is reported so callers can confirm the cut is
/// harmless.
#[derive(Debug, Clone)]
pub struct ErlangChain {
    lambda: f64,
    phase_rate: f64,
    k: usize,
    size: usize,
}

/// State distribution at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSnapshot {
    pub t: f64,
    /// Probability of each phase index.
    pub pmf: Vec<f64>,
    /// Probability held by the highest customer level.
    pub boundary_mass: f64,
    /// Poisson mass ignored by the uniformization sum.
    pub truncation: f64,
}

impl ChainSnapshot {
    pub fn mean_phase_index(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(m, p)| m as f64 * p).sum()
    }
}

impl ErlangChain {
    pub fn new(lambda: f64, mu: f64, k: u32, max_customers: usize) -> ErlangChain {
        let k = k as usize;
        ErlangChain { lambda, phase_rate: k as f64 * mu, k, size: k * max_customers + 1 }
    }

    /// One step of the uniformized chain `v ← v (I + Q/Λ)`.
    fn step(&self, v: &[f64], out: &mut [f64]) {
        let total = self.lambda + self.phase_rate;
        let (pa, pc) = (self.lambda / total, self.phase_rate / total);
        out.iter_mut().for_each(|x| *x = 0.0);
        let top = self.size - 1;
        // Empty state: arrivals only, so it keeps the completion share.
        out[0] += v[0] * pc;
        out[self.k.min(top)] += v[0] * pa;
        for m in 1..self.size {
            let target = m + self.k;
            if target <= top {
                out[target] += v[m] * pa;
            } else {
                out[m] += v[m] * pa;
            }
            out[m - 1] += v[m] * pc;
        }
    }

    /// Distributions at each of `times`, starting from the empty state.
    pub fn solve(&self, times: &[f64]) -> Vec<ChainSnapshot> {
        let total = self.lambda + self.phase_rate;
        let horizon = times.iter().copied().fold(0.0, f64::max) * total;
        let steps = (horizon + 12.0 * horizon.sqrt() + 40.0).ceil() as usize;
        let mut acc = vec![vec![0.0; self.size]; times.len()];
        let mut used = vec![0.0; times.len()];
        let mut v = vec![0.0; self.size];
        v[0] = 1.0;
        let mut next = vec![0.0; self.size];
        for n in 0..=steps {
            for (i, &t) in times.iter().enumerate() {
                let w = poisson_weight(n, total * t);
                if w > 0.0 {
                    used[i] += w;
                    acc[i].iter_mut().zip(&v).for_each(|(a, x)| *a += w * x);
                }
            }
            self.step(&v, &mut next);
            std::mem::swap(&mut v, &mut next);
        }
        let top_level = self.size.saturating_sub(self.k);
        times
            .iter()
            .zip(acc)
            .zip(used)
            .map(|((&t, pmf), used)| ChainSnapshot {
                t,
                boundary_mass: pmf[top_level..].iter().sum(),
                truncation: (1.0 - used).abs(),
                pmf,
            })
            .collect()
    }
}

fn poisson_weight(n: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    (nf * mean.ln() - mean - ln_gamma(nf + 1.0)).exp()
}

/// The fractional (single-order) Erlang queue evaluated term by term: every
/// index tuple of the state series contributes one three-parameter
/// Mittag-Leffler value, with no grouping by exponent.
#[derive(Debug, Clone)]
pub struct SingleOrderRoute {
    q: QueueParams,
    max_order: u64,
}

impl SingleOrderRoute {
    /// `q` must have `c₁ = 1`; the second stable component is ignored.
    pub fn new(q: &QueueParams, max_order: u64) -> SingleOrderRoute {
        SingleOrderRoute { q: *q, max_order }
    }

    /// `L⁻¹[z^{α−1−shift}/(z^α+λ+kμ)^N](t)` for `N = 0..=max_order`, as
    /// `(sign, ln |value|)`.
    fn powers(&self, shift: f64, t: f64) -> CoreResult<Vec<(f64, f64)>> {
        let a = self.q.alpha1;
        let x = -self.q.busy_rate() * t.powf(a);
        let mut table = vec![(0.0, f64::NEG_INFINITY)];
        for order in 1..=self.max_order {
            let beta = a * (order as f64 - 1.0) + shift + 1.0;
            let e = mittag_leffler3_scaled(&MLParams::new(a, beta, order as f64)?, x)?;
            table.push((e.mantissa.signum(), e.ln_scale + e.mantissa.abs().ln() + (beta - 1.0) * t.ln()));
        }
        Ok(table)
    }

    /// Σ_{m ∈ ms, r} A⁰_{m,r} X_{a⁰}.
    fn a0_sum(&self, table: &[(f64, f64)], ms: impl Iterator<Item = u64> + Clone) -> f64 {
        let q = &self.q;
        let mut sum = 0.0;
        for r in 0.. {
            let mut any = false;
            for m in ms.clone() {
                let order = exponent_a0(m, r, q.k);
                if order > self.max_order {
                    break;
                }
                any = true;
                sum += term(ln_coefficient_a(m, r, q), table[order as usize]);
            }
            if !any {
                break;
            }
        }
        sum
    }

    pub fn p0(&self, t: f64) -> CoreResult<f64> {
        let table = self.powers(0.0, t)?;
        Ok(self.a0_sum(&table, 1..))
    }

    pub fn pns(&self, n: u64, s: u32, t: f64) -> CoreResult<f64> {
        let q = &self.q;
        let table = self.powers(0.0, t)?;
        let ln_rate = q.phase_rate().ln();
        let (n2, s2) = successor_index(n, s, q.k);
        let mut sum = 0.0;
        for i in 0.. {
            let d1 = exponent_delta(n, s, i, q.k);
            let d2 = exponent_delta(n2, s2, i, q.k);
            if d1.min(d2) > self.max_order {
                break;
            }
            let (b1, b2) = (ln_coefficient_b(n, s, i, q), ln_coefficient_b(n2, s2, i, q));
            if d1 <= self.max_order {
                sum += term(b1, table[d1 as usize]);
            }
            for r in 0.. {
                if exponent_a0(1, r, q.k) + d1.min(d2) > self.max_order {
                    break;
                }
                for m in 1.. {
                    let a0 = exponent_a0(m, r, q.k);
                    if a0 + d1.min(d2) > self.max_order {
                        break;
                    }
                    let la = ln_rate + ln_coefficient_a(m, r, q);
                    if a0 + d1 <= self.max_order {
                        sum += term(la + b1, table[(a0 + d1) as usize]);
                    }
                    if a0 + d2 <= self.max_order {
                        sum -= term(la + b2, table[(a0 + d2) as usize]);
                    }
                }
            }
        }
        Ok(sum)
    }

    pub fn mean(&self, t: f64) -> CoreResult<f64> {
        let q = &self.q;
        let a = q.alpha1;
        let table = self.powers(a, t)?;
        let drift = q.k as f64 * (q.lambda - q.mu) * (a * t.ln() - ln_gamma(a + 1.0)).exp();
        Ok(drift + q.phase_rate() * self.a0_sum(&table, 1..))
    }

    pub fn busy(&self, t: f64) -> CoreResult<f64> {
        let q = &self.q;
        let table = self.powers(q.alpha1, t)?;
        let k = q.k as u64;
        Ok(q.phase_rate() * self.a0_sum(&table, k..=k))
    }

    /// Survival `E_α(−θ t^α)` of an event time with exponential rate θ.
    pub fn survival(&self, theta: f64, t: f64) -> CoreResult<f64> {
        let a = self.q.alpha1;
        let e = mittag_leffler3_scaled(&MLParams::new(a, 1.0, 1.0)?, -theta * t.powf(a))?;
        Ok(e.value())
    }

    /// Service density `(kμ)^k t^{kα−1} E^k_{α,kα}(−kμ t^α)`.
    pub fn service_density(&self, t: f64) -> CoreResult<f64> {
        let q = &self.q;
        let (a, k) = (q.alpha1, q.k as f64);
        let rate = q.phase_rate();
        let e = mittag_leffler3_scaled(&MLParams::new(a, k * a, k)?, -rate * t.powf(a))?;
        Ok(e.scaled_by_ln(k * rate.ln() + (k * a - 1.0) * t.ln()).value())
    }
}

fn term(ln_coeff: f64, (sign, ln_abs): (f64, f64)) -> f64 {
    if sign == 0.0 {
        0.0
    } else {
        sign * (ln_coeff + ln_abs).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_matches_single_server_closed_form() {
        // k = 1: from empty, p₀ of M/M/1 at small t ≈ 1 − λt.
        let chain = ErlangChain::new(1.0, 2.0, 1, 200);
        let snap = &chain.solve(&[1e-4])[0];
        assert!((snap.pmf[0] - (1.0 - 1e-4)).abs() < 1e-7);
        let total: f64 = snap.pmf.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_conserves_mass_and_stays_inside() {
        let chain = ErlangChain::new(6.0, 5.0, 4, 200);
        for snap in chain.solve(&[0.0, 1.0, 3.0]) {
            let total: f64 = snap.pmf.iter().sum();
            assert!((total - 1.0).abs() < 1e-10, "{total}");
            assert!(snap.boundary_mass < 1e-12);
        }
    }

    #[test]
    fn single_order_classical_survival() {
        let q = QueueParams::classical(6.0, 5.0, 4).unwrap();
        let route = SingleOrderRoute::new(&q, 50);
        let s = route.survival(6.0, 0.3).unwrap();
        assert!((s - (-1.8f64).exp()).abs() < 1e-13);
    }
}
