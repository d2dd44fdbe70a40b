//! Order-statistic (nearest-rank) quantile helpers shared by the filtration,
//! edge-filter and anomaly-detection code.

/// 1-based rank `ceil(fraction * n)` with a guard against floating-point
/// drift when `fraction * n` is meant to be an exact integer.
pub fn nearest_rank_index(n: usize, fraction: f64) -> usize {
    debug_assert!(n > 0);
    debug_assert!(fraction > 0.0 && fraction <= 1.0);
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// The `ceil(fraction * n)`-th smallest value. `fraction` must be in (0, 1].
pub fn nearest_rank_smallest(sorted_ascending: &[f64], fraction: f64) -> f64 {
    let rank = nearest_rank_index(sorted_ascending.len(), fraction);
    sorted_ascending[rank - 1]
}

/// The `ceil(fraction * n)`-th largest value. Selecting
/// `value >= top_fraction_threshold` keeps the top `fraction` of the multiset,
/// ties at the threshold included.
pub fn top_fraction_threshold(values: &[f64], fraction: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let rank = nearest_rank_index(n, fraction);
    sorted[n - rank]
}
