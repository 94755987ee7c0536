//! Small numeric helpers shared across modules.

use std::f64::consts::PI;

/// Sums a slice by pairwise (tree) reduction.
///
/// The summation order is a pure function of the slice length, so results
/// are bitwise reproducible no matter how callers parallelize the work that
/// produced the terms. Accuracy is also better than a running sum for the
/// image-sized reductions used by the loss functions.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean of a slice using pairwise summation. Returns 0 for an empty slice.
pub fn pairwise_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Wraps an angle into `[0, π)`. AoP and normal azimuths are defined modulo π.
pub fn wrap_half_turn(angle: f64) -> f64 {
    let r = angle.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_full_turn(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

/// Distance between two angles compared modulo π.
pub fn half_turn_distance(a: f64, b: f64) -> f64 {
    let d = (wrap_half_turn(a) - wrap_half_turn(b)).abs();
    d.min(PI - d)
}

/// Median of a slice (average of the two middle elements for even lengths).
/// Returns `None` for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}
