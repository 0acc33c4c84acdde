//! Numerical inversion of the closed-form transforms against the
//! time-domain series, and the transformed governing equation for p₀.

use merlang_core::analytic::{service_density_at, survival_at, MeanLength, StateSeries, TruncationPolicy};
use merlang_core::coeffs::QueueParams;
use merlang_core::laplace::{event_survival_c, invert_lt, phi_mix, service_c, LaplaceSeries};

const TIMES: [f64; 6] = [0.1, 0.3, 0.7, 1.2, 2.0, 3.0];

fn max_relative(series: impl Fn(f64) -> f64, inverse: impl Fn(f64) -> f64) -> f64 {
    TIMES
        .iter()
        .map(|&t| {
            let (a, b) = (series(t), inverse(t));
            ((a - b) / b).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn state_quantities_round_trip() {
    let q = QueueParams::baseline();
    let pol = TruncationPolicy::default();
    let p0 = StateSeries::p0(&q, &pol).unwrap();
    let lp0 = LaplaceSeries::p0(&q, &pol).unwrap();
    let d = max_relative(|t| p0.eval(t).unwrap().value, |t| invert_lt(|z| lp0.eval_c(z), t).unwrap());
    println!("p0 {d:e}");
    assert!(d < 1e-6);

    let p11 = StateSeries::pns(1, 1, &q, &pol).unwrap();
    let lp11 = LaplaceSeries::pns(1, 1, &q, &pol).unwrap();
    let d = max_relative(|t| p11.eval(t).unwrap().value, |t| invert_lt(|z| lp11.eval_c(z), t).unwrap());
    println!("p11 {d:e}");
    assert!(d < 1e-6);

    let mean = MeanLength::new(&q, &pol).unwrap();
    let lmean = LaplaceSeries::mean(&q, &pol).unwrap();
    let d = max_relative(|t| mean.eval(t).unwrap().value, |t| invert_lt(|z| lmean.eval_c(z), t).unwrap());
    println!("mean {d:e}");
    assert!(d < 1e-6);

    let busy = StateSeries::busy(&q, &pol).unwrap();
    let lbusy = LaplaceSeries::busy(&q, &pol).unwrap();
    let d = max_relative(|t| busy.eval(t).unwrap().value, |t| invert_lt(|z| lbusy.eval_c(z), t).unwrap());
    println!("busy {d:e}");
    assert!(d < 1e-6);
}

#[test]
fn event_time_quantities_round_trip() {
    let q = QueueParams::baseline();
    for theta in [6.0, 20.0, 26.0] {
        let d = max_relative(
            |t| survival_at(theta, t, &q).unwrap().value,
            |t| invert_lt(|z| Ok(event_survival_c(theta, z, &q)), t).unwrap(),
        );
        println!("survival {theta} {d:e}");
        assert!(d < 1e-6);
    }
    let d = max_relative(
        |t| service_density_at(t, &q).unwrap().value,
        |t| invert_lt(|z| Ok(service_c(z, &q)), t).unwrap(),
    );
    println!("service {d:e}");
    assert!(d < 1e-6);
}

#[test]
fn transformed_governing_equation_for_empty_state() {
    let q = QueueParams::baseline();
    let pol = TruncationPolicy::default();
    let lp0 = LaplaceSeries::p0(&q, &pol).unwrap();
    let lp11 = LaplaceSeries::pns(1, 1, &q, &pol).unwrap();
    for z in [1.0, 2.0, 5.0] {
        let phi = phi_mix(z, &q);
        let p0 = lp0.eval(z).unwrap();
        let p11 = lp11.eval(z).unwrap();
        let lhs = phi * p0 - phi / z;
        let rhs = -q.lambda * p0 + q.phase_rate() * p11;
        let rel = ((lhs - rhs) / lhs).abs();
        println!("z={z} residual {rel:e}");
        assert!(rel < 1e-6);
    }
}
