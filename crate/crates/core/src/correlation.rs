//! Rank correlation between metric scores and human ratings.
//!
//! [`kendall_tau_b`] and [`spearman`] are the validation workhorses:
//! given per-report metric scores and per-report human ratings, they
//! say how well the metric ranks reports the way people do. Both
//! handle ties (tau-b by tie correction, Spearman by average ranks)
//! and reject degenerate input — a constant vector has no ranking to
//! correlate with, and returning NaN would poison downstream tables.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorrelationError {
    #[error("input lengths differ: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("degenerate input: {side} values are all tied")]
    Degenerate { side: &'static str },
    #[error("sample \"{id}\" is missing metric \"{metric}\"")]
    MissingMetric { metric: String, id: String },
}

fn check_paired(x: &[f64], y: &[f64]) -> Result<(), CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < 2 {
        return Err(CorrelationError::TooFewSamples(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(CorrelationError::NonFinite);
    }
    Ok(())
}

/// 1-based ranks; runs of equal values share the average of the ranks
/// they occupy, so `[10, 20, 20, 30]` ranks as `[1, 2.5, 2.5, 4]`.
pub fn rank_average_ties(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        // Positions start..=end (0-based) hold ranks start+1..=end+1.
        let shared = (start + end) as f64 / 2.0 + 1.0;
        for &idx in &order[start..=end] {
            ranks[idx] = shared;
        }
        start = end + 1;
    }
    ranks
}

/// Sum over tie groups of `t * (t - 1) / 2`, the number of pairs the
/// group removes from the concordance comparison.
fn tie_pair_count<K: Ord>(keys: impl Iterator<Item = K>) -> u64 {
    let mut groups: BTreeMap<K, u64> = BTreeMap::new();
    for k in keys {
        *groups.entry(k).or_insert(0) += 1;
    }
    groups.values().map(|&t| t * (t - 1) / 2).sum()
}

/// Strict inversions (`a[i] > a[j]` with `i < j`) counted by merge
/// sort in O(n log n).
fn count_inversions(a: &mut Vec<f64>) -> u64 {
    let n = a.len();
    let mut buffer = vec![0.0; n];
    let mut inversions = 0u64;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo + width < n {
            let mid = lo + width;
            let hi = (mid + width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if a[i] <= a[j] {
                    buffer[k] = a[i];
                    i += 1;
                } else {
                    // a[i] > a[j]: a[j] jumps ahead of everything left
                    // in the first half.
                    inversions += (mid - i) as u64;
                    buffer[k] = a[j];
                    j += 1;
                }
                k += 1;
            }
            buffer[k..k + (mid - i)].copy_from_slice(&a[i..mid]);
            let k = k + (mid - i);
            buffer[k..k + (hi - j)].copy_from_slice(&a[j..hi]);
            a[lo..hi].copy_from_slice(&buffer[lo..hi]);
            lo = hi;
        }
        width *= 2;
    }
    inversions
}

/// Shared machinery for both tau variants: concordant-minus-discordant
/// numerator plus the tie counts needed for denominators.
struct TauCounts {
    numerator: f64,
    total_pairs: u64,
    ties_x: u64,
    ties_y: u64,
}

fn tau_counts(x: &[f64], y: &[f64]) -> TauCounts {
    let n = x.len() as u64;
    let total_pairs = n * (n - 1) / 2;
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let ties_x = tie_pair_count(x.iter().map(|v| v.to_bits()));
    let ties_y = tie_pair_count(y.iter().map(|v| v.to_bits()));
    let ties_joint =
        tie_pair_count(order.iter().map(|&i| (x[i].to_bits(), y[i].to_bits())));

    // With the data sorted by (x, y), every strict y-inversion is a
    // discordant pair, and the Knight identity recovers C - D from the
    // tie counts.
    let mut y_in_x_order: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let discordant = count_inversions(&mut y_in_x_order);
    // Add before subtracting: ties_x + ties_y can exceed total_pairs
    // on heavily tied data, but inclusion-exclusion guarantees
    // total_pairs + ties_joint >= ties_x + ties_y.
    let strictly_ordered = total_pairs + ties_joint - ties_x - ties_y;
    let numerator = strictly_ordered as f64 - 2.0 * discordant as f64;
    TauCounts { numerator, total_pairs, ties_x, ties_y }
}

/// Kendall rank correlation with tie correction:
/// `(C - D) / sqrt((N0 - Tx) * (N0 - Ty))`. A constant vector zeroes
/// a denominator factor and is rejected as degenerate.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    check_paired(x, y)?;
    let counts = tau_counts(x, y);
    if counts.total_pairs == counts.ties_x {
        return Err(CorrelationError::Degenerate { side: "x" });
    }
    if counts.total_pairs == counts.ties_y {
        return Err(CorrelationError::Degenerate { side: "y" });
    }
    let denom_x = (counts.total_pairs - counts.ties_x) as f64;
    let denom_y = (counts.total_pairs - counts.ties_y) as f64;
    Ok(counts.numerator / (denom_x * denom_y).sqrt())
}

/// Tau-a: same numerator as tau-b but divided by all `n(n-1)/2` pairs,
/// with no tie correction. Kept for comparison runs; prefer
/// [`kendall_tau_b`] when ratings contain ties (they almost always
/// do).
pub fn kendall_tau_a(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    check_paired(x, y)?;
    let counts = tau_counts(x, y);
    if counts.total_pairs == counts.ties_x {
        return Err(CorrelationError::Degenerate { side: "x" });
    }
    if counts.total_pairs == counts.ties_y {
        return Err(CorrelationError::Degenerate { side: "y" });
    }
    Ok(counts.numerator / counts.total_pairs as f64)
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut covariance = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        covariance += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 {
        return Err(CorrelationError::Degenerate { side: "x" });
    }
    if var_y == 0.0 {
        return Err(CorrelationError::Degenerate { side: "y" });
    }
    Ok(covariance / (var_x * var_y).sqrt())
}

/// Spearman rank correlation: Pearson correlation of the
/// [`rank_average_ties`] ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    check_paired(x, y)?;
    pearson(&rank_average_ties(x), &rank_average_ties(y))
}

/// One report's metric scores joined with its human rating.
#[derive(Debug, Clone, PartialEq)]
pub struct RatedSample {
    pub id: String,
    pub metric_scores: BTreeMap<String, f64>,
    pub human_rating: f64,
}

/// Correlations of one metric against the human ratings. Degenerate
/// input is reported here, per coefficient, rather than failing the
/// whole table.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub metric: String,
    pub kendall: Result<f64, CorrelationError>,
    pub spearman: Result<f64, CorrelationError>,
}

/// Correlates every metric in the samples against the human ratings.
/// Rows come back sorted by metric name. Every sample must score
/// every metric; a hole is an error because a silently shrunk sample
/// set would not be comparable across rows.
pub fn correlate_metrics(samples: &[RatedSample]) -> Result<Vec<CorrelationRow>, CorrelationError> {
    if samples.len() < 2 {
        return Err(CorrelationError::TooFewSamples(samples.len()));
    }
    let mut metrics: Vec<&String> = samples
        .iter()
        .flat_map(|s| s.metric_scores.keys())
        .collect();
    metrics.sort();
    metrics.dedup();

    let ratings: Vec<f64> = samples.iter().map(|s| s.human_rating).collect();
    let mut rows = Vec::with_capacity(metrics.len());
    for metric in metrics {
        let mut scores = Vec::with_capacity(samples.len());
        for sample in samples {
            match sample.metric_scores.get(metric) {
                Some(v) => scores.push(*v),
                None => {
                    return Err(CorrelationError::MissingMetric {
                        metric: metric.clone(),
                        id: sample.id.clone(),
                    })
                }
            }
        }
        rows.push(CorrelationRow {
            metric: metric.clone(),
            kendall: kendall_tau_b(&scores, &ratings),
            spearman: spearman(&scores, &ratings),
        });
    }
    Ok(rows)
}
