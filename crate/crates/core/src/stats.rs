//! Small numerical helpers: Gaussian tails, medians, sample moments.

use std::f64::consts::{PI, SQRT_2};

/// `P(N(0,1) > x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / SQRT_2)
}

/// `log P(N(0,1) > x)`, accurate far into the upper tail.
pub fn ln_normal_sf(x: f64) -> f64 {
    if x < 30.0 {
        normal_sf(x).ln()
    } else {
        let x2 = x * x;
        // asymptotic Mills-ratio series
        -0.5 * x2 - x.ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Median with the midpoint rule for even lengths. Reorders `values`.
pub fn median_in_place(values: &mut [f64]) -> f64 {
    let k = values.len();
    assert!(k > 0, "median of an empty slice");
    let mid = k / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if k % 2 == 1 {
        upper
    } else {
        let lower = values[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Sample mean and standard error of the mean; the error is absent for a
/// single observation.
pub fn mean_and_se(values: &[f64]) -> (f64, Option<f64>) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    (mean, Some((var / k as f64).sqrt()))
}
