//! Random variates for one-sided stable laws and for the holding times of
//! the time-changed queue.
//!
//! A holding time with rate `θ` is the mixed stable subordinator evaluated at
//! an independent `Exponential(θ)` time:
//!
//! ```text
//! Y = c₁^{1/α₁} X^{1/α₁} D_{α₁}(1) + c₂^{1/α₂} X^{1/α₂} D_{α₂}(1),   X ~ Exp(θ)
//! ```
//!
//! Every call draws fresh, independent stable variates.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::coeffs::QueueParams;

/// Identifies one reproducible random stream.
///
/// Streams with the same seed and different ids are independent ChaCha8
/// streams, so paths can be simulated in any order on any number of threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// One variate of `D_α(1)`, the positive stable law with Laplace transform
/// `exp(-z^α)`, by Kanter's representation. `α = 1` gives the constant 1.
///
/// # Panics
/// If `α` is outside `(0, 1]`.
pub fn sample_stable_unit<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    assert!(alpha > 0.0 && alpha <= 1.0, "stable index must lie in (0, 1], got {alpha}");
    if alpha == 1.0 {
        return 1.0;
    }
    loop {
        // Open interval keeps sin(u) and sin(αu) away from zero.
        let u = PI * rng.gen::<f64>();
        if u <= 0.0 {
            continue;
        }
        let e: f64 = Exp1.sample(rng);
        let a = kanter(alpha, u);
        let d = (a / e).powf((1.0 - alpha) / alpha);
        if d.is_finite() && d > 0.0 {
            return d;
        }
    }
}

/// Kanter's function `A(u) = [sin(αu)/sin u]^{1/(1-α)} · sin((1-α)u)/sin(αu)`.
fn kanter(alpha: f64, u: f64) -> f64 {
    let sa = (alpha * u).sin();
    (sa / u.sin()).powf(1.0 / (1.0 - alpha)) * ((1.0 - alpha) * u).sin() / sa
}

/// The mixed subordinator at a fixed time `x ≥ 0`.
pub fn sample_mixed_subordinator_at<R: Rng + ?Sized>(x: f64, q: &QueueParams, rng: &mut R) -> f64 {
    assert!(x >= 0.0, "subordinator time must be nonnegative, got {x}");
    if x == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for (c, alpha) in [(q.c1, q.alpha1), (q.c2, q.alpha2)] {
        if c > 0.0 {
            total += (c * x).powf(1.0 / alpha) * sample_stable_unit(alpha, rng);
        }
    }
    total
}

/// A holding time with exponential rate `θ` under the random clock.
///
/// `θ = λ` gives inter-arrival times, `θ = kμ` inter-phase times and
/// `θ = λ + kμ` the sojourn in a busy state.
pub fn sample_event_time<R: Rng + ?Sized>(theta: f64, q: &QueueParams, rng: &mut R) -> f64 {
    let clock = Exp::new(theta).unwrap_or_else(|_| panic!("event rate must be positive, got {theta}"));
    let x = clock.sample(rng);
    sample_mixed_subordinator_at(x, q, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| RngStream::new(7, 3).rng().gen()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut r0 = RngStream::new(7, 3).rng();
        let mut r1 = RngStream::new(7, 4).rng();
        assert_ne!(r0.gen::<u64>(), r1.gen::<u64>());
    }

    #[test]
    fn half_stable_laplace_transform() {
        let mut rng = RngStream::new(11, 0).rng();
        let n = 200_000;
        let mean = (0..n).map(|_| (-sample_stable_unit(0.5, &mut rng)).exp()).sum::<f64>() / n as f64;
        assert!((mean - (-1.0f64).exp()).abs() < 3e-3, "{mean}");
    }

    #[test]
    fn classical_clock_is_exponential() {
        let q = QueueParams::classical(6.0, 5.0, 4).unwrap();
        let mut a = RngStream::new(5, 1).rng();
        let mut b = RngStream::new(5, 1).rng();
        for _ in 0..100 {
            let y = sample_event_time(3.0, &q, &mut a);
            let x = Exp::new(3.0).unwrap().sample(&mut b);
            assert_eq!(y, x);
        }
    }

    #[test]
    fn zero_time_and_positivity() {
        let q = QueueParams::baseline();
        let mut rng = RngStream::new(1, 2).rng();
        assert_eq!(sample_mixed_subordinator_at(0.0, &q, &mut rng), 0.0);
        for _ in 0..10_000 {
            assert!(sample_event_time(26.0, &q, &mut rng) > 0.0);
            assert!(sample_stable_unit(0.3, &mut rng) > 0.0);
        }
    }
}
