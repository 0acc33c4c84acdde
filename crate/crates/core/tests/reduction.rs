//! With c₁ = 1 the mixed queue is the single-order fractional Erlang queue.
//! Here every mixed series is compared with an ungrouped evaluation that
//! applies the three-parameter Mittag-Leffler function term by term.

use merlang_core::analytic::{service_density_at, survival_at, MeanLength, StateSeries, TruncationPolicy};
use merlang_core::coeffs::{
    exponent_a0, exponent_delta, kernel_f, ln_coefficient_a, ln_coefficient_b, successor_index, QueueParams,
};
use merlang_core::specfun::{ln_gamma, mittag_leffler3, mittag_leffler3_scaled, MLParams};

const MAX_ORDER: u64 = 400;
const TIMES: [f64; 3] = [0.25, 0.5, 1.0];

fn fractional(alpha: f64, c2_order: f64) -> QueueParams {
    QueueParams::new(6.0, 5.0, 4, 1.0, 0.0, alpha, c2_order).unwrap()
}

/// `t^{α(N−1)+shift} E^N_{α, α(N−1)+shift+1}(−(λ+kμ)t^α)`, the inverse
/// transform of `z^{α−1−shift}/(z^α+λ+kμ)^N`, as `(sign, ln |·|)`.
fn power_term(q: &QueueParams, order: u64, shift: f64, t: f64) -> (f64, f64) {
    let a = q.alpha1;
    let n = order as f64;
    let beta = a * (n - 1.0) + shift + 1.0;
    let p = MLParams::new(a, beta, n).unwrap();
    let e = mittag_leffler3_scaled(&p, -q.busy_rate() * t.powf(a)).unwrap();
    (e.mantissa.signum(), e.ln_scale + e.mantissa.abs().ln() + (beta - 1.0) * t.ln())
}

/// [`power_term`] for every order up to [`MAX_ORDER`], indexed by order.
fn power_table(q: &QueueParams, shift: f64, t: f64) -> Vec<(f64, f64)> {
    let mut table = vec![(0.0, f64::NEG_INFINITY)];
    table.extend((1..=MAX_ORDER).map(|n| power_term(q, n, shift, t)));
    table
}

fn add(sum: &mut f64, sign: f64, ln_coeff: f64, term: (f64, f64)) {
    if term.0 != 0.0 {
        *sum += sign * term.0 * (ln_coeff + term.1).exp();
    }
}

/// Σ_{m,r} A⁰_{m,r} X_{a⁰+offset}, every index pair evaluated separately.
fn a0_sum(q: &QueueParams, offset: u64, shift: f64, t: f64, m_first: u64, m_last: u64) -> f64 {
    let table = power_table(q, shift, t);
    let mut sum = 0.0;
    for r in 0.. {
        if exponent_a0(m_first, r, q.k) + offset > MAX_ORDER {
            break;
        }
        for m in m_first..=m_last {
            let a = exponent_a0(m, r, q.k) + offset;
            if a > MAX_ORDER {
                break;
            }
            add(&mut sum, 1.0, ln_coefficient_a(m, r, q), table[a as usize]);
        }
    }
    sum
}

fn close(a: f64, b: f64, what: &str) {
    let rel = ((a - b) / b).abs();
    assert!(rel < 1e-10, "{what}: {a} vs {b}, rel {rel:e}");
}

#[test]
fn empty_state_probability() {
    for alpha in [0.5, 0.8] {
        let q = fractional(alpha, 0.3);
        let series = StateSeries::p0(&q, &TruncationPolicy::default()).unwrap();
        for t in TIMES {
            let direct = a0_sum(&q, 0, 0.0, t, 1, MAX_ORDER);
            close(series.eval(t).unwrap().value, direct, &format!("p0 α={alpha} t={t}"));
        }
    }
}

#[test]
fn busy_state_probabilities() {
    let q = fractional(0.5, 0.3);
    let rate = q.phase_rate().ln();
    for (n, s) in [(1, 1), (1, 4), (2, 2)] {
        let series = StateSeries::pns(n, s, &q, &TruncationPolicy::default()).unwrap();
        let (n2, s2) = successor_index(n, s, q.k);
        for t in TIMES {
            let table = power_table(&q, 0.0, t);
            let mut direct = 0.0;
            for i in 0.. {
                let d1 = exponent_delta(n, s, i, q.k);
                let d2 = exponent_delta(n2, s2, i, q.k);
                if d1.min(d2) > MAX_ORDER {
                    break;
                }
                let (b1, b2) = (ln_coefficient_b(n, s, i, &q), ln_coefficient_b(n2, s2, i, &q));
                if d1 <= MAX_ORDER {
                    add(&mut direct, 1.0, b1, table[d1 as usize]);
                }
                for r in 0.. {
                    if exponent_a0(1, r, q.k) + d1.min(d2) > MAX_ORDER {
                        break;
                    }
                    for m in 1.. {
                        let a0 = exponent_a0(m, r, q.k);
                        if a0 + d1.min(d2) > MAX_ORDER {
                            break;
                        }
                        let la = ln_coefficient_a(m, r, &q) + rate;
                        if a0 + d1 <= MAX_ORDER {
                            add(&mut direct, 1.0, la + b1, table[(a0 + d1) as usize]);
                        }
                        if a0 + d2 <= MAX_ORDER {
                            add(&mut direct, -1.0, la + b2, table[(a0 + d2) as usize]);
                        }
                    }
                }
            }
            let v = series.eval(t).unwrap().value;
            let rel = ((v - direct) / direct).abs();
            assert!(rel < 1e-10, "p_({n},{s})({t}): {v} vs {direct}, rel {rel:e}");
        }
    }
}

#[test]
fn mean_length_and_busy_period() {
    let q = fractional(0.5, 0.3);
    let pol = TruncationPolicy::default();
    let mean = MeanLength::new(&q, &pol).unwrap();
    let busy = StateSeries::busy(&q, &pol).unwrap();
    let k = q.k as f64;
    let a = q.alpha1;
    for t in TIMES {
        // kμ Σ A⁰ L⁻¹[z^{−1}(z^α+λ+kμ)^{−a⁰}] has β = αa⁰ + 1, i.e. shift α.
        let drift = k * (q.lambda - q.mu) * (a * t.ln() - ln_gamma(a + 1.0)).exp();
        let direct = drift + q.phase_rate() * a0_sum(&q, 0, a, t, 1, MAX_ORDER);
        close(mean.eval(t).unwrap().value, direct, &format!("mean t={t}"));

        let direct = q.phase_rate() * a0_sum(&q, 0, a, t, q.k as u64, q.k as u64);
        close(busy.eval(t).unwrap().value, direct, &format!("busy t={t}"));
    }
}

#[test]
fn event_time_laws_are_mittag_leffler() {
    let q = fractional(0.5, 0.3);
    let a = q.alpha1;
    for t in TIMES {
        for theta in [6.0, 20.0, 26.0] {
            let ml = mittag_leffler3(&MLParams::new(a, 1.0, 1.0).unwrap(), -theta * t.powf(a)).unwrap().value;
            close(survival_at(theta, t, &q).unwrap().value, ml, &format!("survival θ={theta} t={t}"));
        }
        // Erlang-k of inter-phase times: t^{kα−1} (kμ)^k E^k_{α,kα}(−kμ t^α).
        let kk = q.k as f64;
        let p = MLParams::new(a, kk * a, kk).unwrap();
        let ml = mittag_leffler3(&p, -q.phase_rate() * t.powf(a)).unwrap().value;
        let direct = ml * t.powf(kk * a - 1.0) * q.phase_rate().powf(kk);
        close(service_density_at(t, &q).unwrap().value, direct, &format!("service t={t}"));
    }
}

#[test]
fn second_order_drops_out() {
    let pol = TruncationPolicy::default();
    let a = fractional(0.5, 0.3);
    let b = fractional(0.5, 0.1);
    for t in TIMES {
        let pa = StateSeries::pns(2, 3, &a, &pol).unwrap().eval(t).unwrap().value;
        let pb = StateSeries::pns(2, 3, &b, &pol).unwrap().eval(t).unwrap().value;
        assert_eq!(pa, pb);
        let ma = MeanLength::new(&a, &pol).unwrap().eval(t).unwrap().value;
        let mb = MeanLength::new(&b, &pol).unwrap().eval(t).unwrap().value;
        assert_eq!(ma, mb);
        for n in 1..5 {
            assert_eq!(kernel_f(n, t, &a).unwrap(), kernel_f(n, t, &b).unwrap());
        }
    }
}
