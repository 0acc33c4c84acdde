//! Values frozen from 40-digit evaluations: the zero-state probability at
//! the baseline parameters obtained by Talbot inversion of its transform
//! with every exponent up to 400 retained (converged to all printed digits
//! for t ≤ 2).

use merlang_core::analytic::{StateSeries, TruncationPolicy};
use merlang_core::coeffs::QueueParams;

const REFERENCE: [(f64, f64); 5] = [
    (0.1, 0.330614622532412),
    (0.5, 0.236506040626298),
    (1.0, 0.203304621584),
    (2.0, 0.174062069152),
    (3.0, 0.158652122835),
];

#[test]
fn zero_state_probability_matches_high_precision_inversion() {
    let q = QueueParams::baseline();
    let series = StateSeries::p0(&q, &TruncationPolicy::default()).unwrap();
    for (t, expected) in &REFERENCE[..4] {
        let v = series.eval(*t).unwrap();
        assert!((v.value / expected - 1.0).abs() < 5e-10, "t={t}: {} vs {expected}", v.value);
        assert!(v.converged);
        assert!(v.error < 1e-9);
    }
}

#[test]
fn same_truncation_reproduces_reference_at_late_time() {
    let q = QueueParams::baseline();
    let pol = TruncationPolicy { max_conv_n: 400, ..Default::default() };
    let v = StateSeries::p0(&q, &pol).unwrap().eval(3.0).unwrap();
    assert!((v.value / REFERENCE[4].1 - 1.0).abs() < 1e-10, "{}", v.value);
    let full = StateSeries::p0(&q, &TruncationPolicy::default()).unwrap().eval(3.0).unwrap();
    assert!(full.converged);
    assert!((full.value - v.value).abs() < 1e-8);
}
