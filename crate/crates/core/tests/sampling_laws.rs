//! Distributional checks of the variate generators against closed forms
//! and the analytic survival series.

use merlang_core::analytic::survival_at;
use merlang_core::coeffs::QueueParams;
use merlang_core::laplace::lt_event_survival;
use merlang_core::sampling::{sample_event_time, sample_mixed_subordinator_at, sample_stable_unit, RngStream};
use rand_distr::{Distribution, Exp};
use statrs::function::erf::erfc;

/// Two-sample Kolmogorov–Smirnov distance.
fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample distance between sorted data and a continuous CDF.
fn ks_one_sample(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Like [`ks_one_sample`] but evaluates the CDF only at every `stride`-th
/// order statistic. Between them both functions are monotone, so the true
/// distance exceeds the result by at most `stride/n`.
fn ks_one_sample_strided(mut xs: Vec<f64>, stride: usize, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    (0..xs.len())
        .step_by(stride)
        .map(|i| {
            let f = cdf(xs[i]);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn half_stable_matches_levy_law() {
    let mut rng = RngStream::new(21, 0).rng();
    let xs: Vec<f64> = (0..100_000).map(|_| sample_stable_unit(0.5, &mut rng)).collect();
    let d = ks_one_sample(xs, |x| erfc(1.0 / (2.0 * x.sqrt())));
    assert!(d < 0.006, "KS {d}");
}

#[test]
fn composite_and_direct_samplers_agree() {
    let q = QueueParams::baseline();
    let clock = Exp::new(q.lambda).unwrap();
    let mut r1 = RngStream::new(31, 0).rng();
    let mut r2 = RngStream::new(31, 1).rng();
    let n = 50_000;
    let composite: Vec<f64> =
        (0..n).map(|_| { let x = clock.sample(&mut r1); sample_mixed_subordinator_at(x, &q, &mut r1) }).collect();
    let direct: Vec<f64> = (0..n).map(|_| sample_event_time(q.lambda, &q, &mut r2)).collect();
    let d = ks_two_sample(composite, direct);
    // 1.36·√(2/n) is the 5% critical value.
    assert!(d < 1.36 * (2.0 / n as f64).sqrt(), "KS {d}");
}

#[test]
fn mixed_subordinator_transform() {
    let q = QueueParams::baseline();
    let mut rng = RngStream::new(41, 0).rng();
    let n = 200_000;
    let vals: Vec<f64> = (0..n).map(|_| (-sample_mixed_subordinator_at(0.7, &q, &mut rng)).exp()).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt();
    assert!((mean - (-0.7f64).exp()).abs() < 4.0 * sd, "{mean} ± {sd}");
}

#[test]
fn subordinator_self_similarity() {
    // For a single order, D(2x) has the law of 2^{1/α} D(x).
    let q = QueueParams::new(6.0, 5.0, 4, 1.0, 0.0, 0.6, 0.3).unwrap();
    let mut r1 = RngStream::new(51, 0).rng();
    let mut r2 = RngStream::new(51, 1).rng();
    let n = 50_000;
    let scaled: Vec<f64> = (0..n).map(|_| 2f64.powf(1.0 / 0.6) * sample_mixed_subordinator_at(0.4, &q, &mut r1)).collect();
    let doubled: Vec<f64> = (0..n).map(|_| sample_mixed_subordinator_at(0.8, &q, &mut r2)).collect();
    let d = ks_two_sample(scaled, doubled);
    assert!(d < 1.36 * (2.0 / n as f64).sqrt(), "KS {d}");
}

#[test]
fn event_times_follow_series_survival() {
    let q = QueueParams::baseline();
    for (id, theta) in [6.0, 20.0, 26.0].into_iter().enumerate() {
        let mut rng = RngStream::new(61, id as u64).rng();
        let xs: Vec<f64> = (0..20_000).map(|_| sample_event_time(theta, &q, &mut rng)).collect();
        let d = ks_one_sample_strided(xs, 20, |t| 1.0 - survival_at(theta, t, &q).unwrap().value);
        assert!(d < 0.015, "θ={theta} KS {d}");
    }
}

#[test]
fn event_time_transforms() {
    // E[e^{−zY}] = 1 − z·L[survival](z).
    let q = QueueParams::baseline();
    let n = 100_000;
    let mut rng = RngStream::new(71, 0).rng();
    let ys: Vec<f64> = (0..n).map(|_| sample_event_time(26.0, &q, &mut rng)).collect();
    for z in [1.0, 2.0, 5.0] {
        let vals: Vec<f64> = ys.iter().map(|y| (-z * y).exp()).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt();
        let exact = 1.0 - z * lt_event_survival(26.0, z, &q).unwrap();
        assert!((mean - exact).abs() < 4.0 * sd, "z={z}: {mean} vs {exact} ± {sd}");
    }
}
