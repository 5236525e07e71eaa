//! Small order-statistic helpers shared across the crate.

/// Index rule for the upper empirical quantile at `level`: the smallest
/// 1-based rank `k` with `k/n >= level`. Returned as a 0-based index.
///
/// The comparison is done on the ratio itself (not on `ceil(level * n)`)
/// so exact boundaries like `k/n == level` resolve the same way the
/// definition reads.
pub fn upper_quantile_index(n: usize, level: f64) -> usize {
    assert!(n > 0, "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&level), "quantile level out of range");
    let mut k = (level * n as f64).floor() as usize;
    k = k.clamp(1, n);
    // Walk to the smallest k with k/n >= level; the floor estimate is off by
    // at most one in either direction.
    while k > 1 && (k - 1) as f64 / n as f64 >= level {
        k -= 1;
    }
    while (k as f64) / (n as f64) < level && k < n {
        k += 1;
    }
    k - 1
}

/// Upper empirical quantile at `level` of `values` (the smallest order
/// statistic whose ECDF reaches `level`). Not interpolated.
pub fn upper_quantile(values: &[f64], level: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[upper_quantile_index(sorted.len(), level)]
}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Median of the non-missing values; `None` if empty. Even-sized samples
/// take the midpoint of the two central order statistics.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        Some(sorted[n / 2])
    } else {
        Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2]))
    }
}
