//! Kolmogorov–Smirnov distances used by the Monte Carlo checks.

/// Sorts a sample in place, ordering NaN last.
pub fn sort_sample(xs: &mut [f64]) {
    xs.sort_by(f64::total_cmp);
}

/// Two-sample distance `sup |F_a − F_b|` between two sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
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

/// One-sample distance between a sorted sample and a continuous CDF.
///
/// When `stride > 1` the CDF is evaluated only at every `stride`-th order
/// statistic. Both functions are monotone, so the exact distance exceeds
/// the returned one by at most `stride / n`; the bound is added to keep the
/// result conservative.
pub fn ks_one_sample(sorted: &[f64], stride: usize, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let stride = stride.max(1);
    let mut idx: Vec<usize> = (0..sorted.len()).step_by(stride).collect();
    if idx.last() != Some(&(sorted.len() - 1)) {
        idx.push(sorted.len() - 1);
    }
    let d = idx
        .into_iter()
        .map(|i| {
            let f = cdf(sorted[i]);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    if stride > 1 {
        d + (stride - 1) as f64 / n
    } else {
        d
    }
}

/// Sup distance between an empirical CDF given by a right-continuous step
/// function and a continuous CDF, over the jump points of the step function
/// and the end of an observation window.
pub fn sup_distance_on_steps(jumps: &[f64], window_end: f64, empirical: impl Fn(f64) -> f64, cdf: impl Fn(f64) -> f64) -> f64 {
    let mut d = 0.0f64;
    let mut below = 0.0;
    for &x in jumps.iter().filter(|&&x| x <= window_end) {
        let f = cdf(x);
        d = d.max((f - below).abs()).max((f - empirical(x)).abs());
        below = empirical(x);
    }
    d.max((cdf(window_end) - empirical(window_end)).abs())
}

/// Mean and standard error of a sample.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
