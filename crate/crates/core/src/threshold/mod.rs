//! Automatic occurrence thresholds.
//!
//! For one gram order: tally how many distinct grams have each occurrence
//! value, smooth that histogram with loess, differentiate it, and split the
//! derivative series into two clusters. The low-occurrence cluster marks
//! the grams that are likely to carry dynamic variables.

mod ckmeans;
mod loess;

pub use ckmeans::{ckmeans_breaks, split_two_clusters, TwoClusterSplit};
pub use loess::loess;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::dictionary::NGramDictionary;

#[derive(Debug, Error, PartialEq)]
pub enum ThresholdError {
    #[error("dictionary has no {0}-grams")]
    EmptyDictionary(usize),
    #[error("need at least 2 values to split, got {0}")]
    TooFewValues(usize),
    #[error("non-finite value in cluster input")]
    NonFinite,
    #[error("loess span must be in (0, 1], got {0}")]
    BadSpan(f64),
}

/// `(occurrence value, number of distinct grams with exactly that value)`,
/// sorted by occurrence value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceHistogram {
    pub points: Vec<(u64, u64)>,
}

impl OccurrenceHistogram {
    pub fn from_counts(counts: impl IntoIterator<Item = u64>) -> Self {
        let mut tally: FxHashMap<u64, u64> = FxHashMap::default();
        for c in counts {
            *tally.entry(c).or_insert(0) += 1;
        }
        let mut points: Vec<(u64, u64)> = tally.into_iter().collect();
        points.sort_unstable();
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn distinct_grams(&self) -> u64 {
        self.points.iter().map(|p| p.1).sum()
    }

    fn as_f64(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|&(x, y)| (x as f64, y as f64)).collect()
    }
}

/// Per-order thresholds. A gram whose count is strictly smaller than the
/// threshold of its order is low-appearing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ThresholdPair {
    pub t2: u64,
    pub t3: u64,
}

impl ThresholdPair {
    /// Used when an order has no evidence at all: only unseen grams are low.
    pub const FALLBACK: ThresholdPair = ThresholdPair { t2: 1, t3: 1 };

    pub fn new(t2: u64, t3: u64) -> Self {
        Self { t2: t2.max(1), t3: t3.max(1) }
    }

    pub fn for_order(&self, order: usize) -> u64 {
        if order == 2 { self.t2 } else { self.t3 }
    }
}

/// Which series the two-cluster break is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BreakBasis {
    /// Derivative of the smoothed histogram.
    #[default]
    Derivative,
    /// The smoothed histogram values themselves.
    Smoothed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    pub span: f64,
    pub basis: BreakBasis,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { span: 0.75, basis: BreakBasis::Derivative }
    }
}

pub fn histogram(dict: &NGramDictionary, order: usize) -> Result<OccurrenceHistogram, ThresholdError> {
    let h = OccurrenceHistogram::from_counts(dict.counts(order));
    if h.is_empty() {
        return Err(ThresholdError::EmptyDictionary(order));
    }
    Ok(h)
}

pub fn loess_smooth(h: &OccurrenceHistogram, span: f64) -> Result<Vec<(f64, f64)>, ThresholdError> {
    if !(span > 0.0 && span <= 1.0) {
        return Err(ThresholdError::BadSpan(span));
    }
    Ok(loess(&h.as_f64(), span))
}

/// Finite differences against the actual x spacing: forward at the first
/// point, backward at the last, central elsewhere. Needs two points.
pub fn derivative(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let n = points.len();
    if n < 2 {
        return points.iter().map(|&(x, _)| (x, 0.0)).collect();
    }
    let slope = |a: usize, b: usize| (points[b].1 - points[a].1) / (points[b].0 - points[a].0);
    (0..n)
        .map(|i| {
            let d = match i {
                0 => slope(0, 1),
                i if i == n - 1 => slope(n - 2, n - 1),
                i => slope(i - 1, i + 1),
            };
            (points[i].0, d)
        })
        .collect()
}

/// Threshold for one histogram.
///
/// The cluster holding the smallest occurrence value is the dynamic one and
/// the threshold is the largest occurrence value in it. That value sits at
/// the elbow of the histogram, so with `count < threshold` it lands on the
/// static side. The threshold never drops below the smallest value plus one.
pub fn threshold_from_histogram(
    h: &OccurrenceHistogram,
    cfg: &ThresholdConfig,
) -> Result<u64, ThresholdError> {
    match h.points.as_slice() {
        [] => Err(ThresholdError::EmptyDictionary(0)),
        [_] => Ok(2),
        [(a, _), (b, _)] => Ok((a + b).div_ceil(2)),
        points => {
            let smoothed = loess_smooth(h, cfg.span)?;
            let series: Vec<f64> = match cfg.basis {
                BreakBasis::Derivative => derivative(&smoothed).into_iter().map(|p| p.1).collect(),
                BreakBasis::Smoothed => smoothed.into_iter().map(|p| p.1).collect(),
            };
            let split = split_two_clusters(&series)?;
            let dynamic_is_low = split.in_low[0];
            let max_dynamic = points
                .iter()
                .zip(&split.in_low)
                .filter(|(_, &low)| low == dynamic_is_low)
                .map(|(p, _)| p.0)
                .max()
                .expect("cluster is non-empty");
            Ok(max_dynamic.max(points[0].0 + 1))
        }
    }
}

pub fn estimate_order(
    dict: &NGramDictionary,
    order: usize,
    cfg: &ThresholdConfig,
) -> Result<u64, ThresholdError> {
    threshold_from_histogram(&histogram(dict, order)?, cfg)
}

/// Estimates both thresholds; fails when either order is empty.
pub fn estimate(dict: &NGramDictionary, cfg: &ThresholdConfig) -> Result<ThresholdPair, ThresholdError> {
    Ok(ThresholdPair {
        t2: estimate_order(dict, 2, cfg)?,
        t3: estimate_order(dict, 3, cfg)?,
    })
}

/// Like [`estimate`], but an order without grams gets the fallback threshold.
pub fn estimate_or_fallback(dict: &NGramDictionary, cfg: &ThresholdConfig) -> ThresholdPair {
    let get = |order, fallback| match estimate_order(dict, order, cfg) {
        Ok(t) => t,
        Err(_) => fallback,
    };
    ThresholdPair {
        t2: get(2, ThresholdPair::FALLBACK.t2),
        t3: get(3, ThresholdPair::FALLBACK.t3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::DictionaryBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn histogram_tally() {
        let h = OccurrenceHistogram::from_counts([1, 1, 5]);
        assert_eq!(h.points, [(1, 2), (5, 1)]);
        assert_eq!(h.distinct_grams(), 3);
    }

    #[test]
    fn histogram_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let counts: Vec<u64> = (0..10).map(|_| rng.gen_range(1..6)).collect();
        let mut want: BTreeMap<u64, u64> = BTreeMap::new();
        for c in &counts {
            *want.entry(*c).or_default() += 1;
        }
        let h = OccurrenceHistogram::from_counts(counts);
        assert_eq!(h.points, want.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn empty_order_is_an_error() {
        let d = NGramDictionary::new();
        assert_eq!(histogram(&d, 2), Err(ThresholdError::EmptyDictionary(2)));
        assert_eq!(estimate_or_fallback(&d, &ThresholdConfig::default()), ThresholdPair::FALLBACK);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(derivative(&[(1.0, 10.0), (2.0, 4.0)]), [(1.0, -6.0), (2.0, -6.0)]);
        let lin: Vec<_> = [0.5, 1.0, 4.0, 4.5, 9.0].iter().map(|&x| (x, 3.0 * x - 1.0)).collect();
        for (_, d) in derivative(&lin) {
            assert!((d - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_difference_quotients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = 0.0;
        let pts: Vec<(f64, f64)> = (0..10)
            .map(|_| {
                x += rng.gen_range(0.5..3.0);
                (x, rng.gen_range(-10.0..10.0))
            })
            .collect();
        let d = derivative(&pts);
        assert_eq!(d[0].1, (pts[1].1 - pts[0].1) / (pts[1].0 - pts[0].0));
        assert_eq!(d[9].1, (pts[9].1 - pts[8].1) / (pts[9].0 - pts[8].0));
        for i in 1..9 {
            let want = (pts[i + 1].1 - pts[i - 1].1) / (pts[i + 1].0 - pts[i - 1].0);
            assert!((d[i].1 - want).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_fallbacks() {
        let cfg = ThresholdConfig::default();
        let one = OccurrenceHistogram { points: vec![(1, 40)] };
        assert_eq!(threshold_from_histogram(&one, &cfg), Ok(2));
        let two = OccurrenceHistogram { points: vec![(1, 500), (50, 20)] };
        assert_eq!(threshold_from_histogram(&two, &cfg), Ok(26));
    }

    #[test]
    fn all_count_one_is_all_dynamic() {
        let mut b = DictionaryBuilder::new();
        b.push(&["a", "b", "c", "d", "e", "f"]);
        let d = b.finish();
        let t = estimate(&d, &ThresholdConfig::default()).unwrap();
        assert_eq!(t, ThresholdPair { t2: 2, t3: 2 });
    }

    #[test]
    fn spike_then_tail_breaks_low() {
        // Many singletons, a few doubles, a sparse tail of frequent grams.
        let mut points = vec![(1, 900), (2, 120), (3, 30), (4, 8)];
        points.extend([(40, 3), (41, 2), (55, 4), (60, 1), (77, 2), (90, 5), (120, 1), (150, 2)]);
        let h = OccurrenceHistogram { points };
        let t = threshold_from_histogram(&h, &ThresholdConfig::default()).unwrap();
        assert!((5..=40).contains(&t), "{t}");
        let smoothed = ThresholdConfig { basis: BreakBasis::Smoothed, ..Default::default() };
        let t = threshold_from_histogram(&h, &smoothed).unwrap();
        assert!((2..=40).contains(&t), "{t}");
    }
}
