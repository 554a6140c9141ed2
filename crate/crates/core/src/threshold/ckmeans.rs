//! Optimal univariate k-means by dynamic programming over sorted values.

use super::ThresholdError;

/// Result of splitting a sequence of values into a low and a high cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoClusterSplit {
    /// Position in sorted order of the first element of the high cluster.
    pub break_index: usize,
    /// Per input position: `true` when the value belongs to the low cluster.
    pub in_low: Vec<bool>,
    /// Within-cluster sum of squared deviations of the chosen split.
    pub cost: f64,
    /// All values were equal; the split after the first element is arbitrary.
    pub degenerate: bool,
}

/// Sum of squared deviations of `sorted[i..=j]` from prefix sums.
#[inline]
fn ssq(sum: &[f64], sumsq: &[f64], i: usize, j: usize) -> f64 {
    let n = (j - i + 1) as f64;
    let s = sum[j + 1] - sum[i];
    let s2 = sumsq[j + 1] - sumsq[i];
    (s2 - s * s / n).max(0.0)
}

/// Returns the start index (in `sorted`) of each of the `k` clusters of the
/// optimal partition. Ties resolve towards earlier boundaries.
pub fn ckmeans_breaks(sorted: &[f64], k: usize) -> Vec<usize> {
    let n = sorted.len();
    assert!(k >= 1 && k <= n, "need 1 <= k <= n");
    // Shift by the median for numerical stability of the prefix sums.
    let shift = sorted[n / 2];
    let mut sum = vec![0.0; n + 1];
    let mut sumsq = vec![0.0; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        let v = v - shift;
        sum[i + 1] = sum[i] + v;
        sumsq[i + 1] = sumsq[i] + v * v;
    }

    // cost[c][i]: best cost of splitting sorted[..=i] into c+1 clusters.
    let mut cost = vec![vec![f64::INFINITY; n]; k];
    let mut back = vec![vec![0usize; n]; k];
    for i in 0..n {
        cost[0][i] = ssq(&sum, &sumsq, 0, i);
    }
    for c in 1..k {
        for i in c..n {
            for j in c..=i {
                let candidate = cost[c - 1][j - 1] + ssq(&sum, &sumsq, j, i);
                if candidate < cost[c][i] {
                    cost[c][i] = candidate;
                    back[c][i] = j;
                }
            }
        }
    }

    let mut starts = vec![0usize; k];
    let mut end = n - 1;
    for c in (1..k).rev() {
        let j = back[c][end];
        starts[c] = j;
        end = j - 1;
    }
    starts
}

/// Optimal two-cluster split of `values` (any order).
pub fn split_two_clusters(values: &[f64]) -> Result<TwoClusterSplit, ThresholdError> {
    if values.len() < 2 {
        return Err(ThresholdError::TooFewValues(values.len()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ThresholdError::NonFinite);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let degenerate = sorted[0] == sorted[sorted.len() - 1];
    let break_index = if degenerate { 1 } else { ckmeans_breaks(&sorted, 2)[1] };

    let mut in_low = vec![false; values.len()];
    for &i in &order[..break_index] {
        in_low[i] = true;
    }
    let cost = sq_dev(&sorted[..break_index]) + sq_dev(&sorted[break_index..]);
    Ok(TwoClusterSplit {
        break_index,
        in_low,
        cost,
        degenerate,
    })
}

fn sq_dev(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum()
}
