//! Token-level text similarity metrics: BLEU, ROUGE-L, and a
//! lightweight METEOR. All three are generic over the token type and
//! return values in [0, 1]; comparing equal sequences yields 1 (METEOR
//! approaches it from below by its fragmentation penalty).
//!
//! BLEU here serves two roles: whole-report comparison, and scoring
//! short location phrases inside the report metric. Location phrases
//! can be shorter than the n-gram order, so [`BleuConfig`] can clip the
//! order to the sequence lengths; the default configuration is the one
//! used for locations (order 4, clipping on, add-one smoothing).

use std::collections::HashMap;
use std::hash::Hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    /// Raw precisions; any zero n-gram precision zeroes the score.
    None,
    /// Add-one smoothing, `(matches + 1) / (total + 1)`, applied to
    /// orders n >= 2 only. Unigram precision stays raw.
    AddOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BleuConfig {
    /// Highest n-gram order scored (1..=4 in practice).
    pub max_n: usize,
    pub smoothing: Smoothing,
    /// Lower `max_n` to `min(max_n, |reference|, |hypothesis|)` so a
    /// two-token phrase is scored on unigrams and bigrams instead of
    /// being zeroed by missing trigrams.
    pub clip_max_n_to_lengths: bool,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig { max_n: 4, smoothing: Smoothing::AddOne, clip_max_n_to_lengths: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("reference token sequence is empty")]
    EmptyReference,
}

/// Multiset of n-grams as a map from window to occurrence count.
/// Requires `n >= 1`; returns an empty map when the sequence is
/// shorter than `n`.
pub fn ngrams<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    assert!(n >= 1, "n-gram order must be at least 1");
    let mut counts: HashMap<&[T], usize> = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Modified-precision BLEU: geometric mean of clipped n-gram
/// precisions for orders `1..=N`, times a brevity penalty
/// `exp(1 - |ref| / |hyp|)` when the hypothesis is shorter than the
/// reference. An empty hypothesis scores 0; an empty reference is an
/// error. Equal sequences score exactly 1.
pub fn bleu<T: Eq + Hash>(
    reference: &[T],
    hypothesis: &[T],
    cfg: BleuConfig,
) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    if hypothesis.is_empty() {
        return Ok(0.0);
    }
    let effective_n = if cfg.clip_max_n_to_lengths {
        cfg.max_n.min(reference.len()).min(hypothesis.len()).max(1)
    } else {
        cfg.max_n.max(1)
    };

    let mut log_precision_sum = 0.0;
    for n in 1..=effective_n {
        let reference_grams = ngrams(reference, n);
        let hypothesis_grams = ngrams(hypothesis, n);
        let mut matched = 0usize;
        let mut total = 0usize;
        for (gram, &count) in &hypothesis_grams {
            total += count;
            matched += count.min(reference_grams.get(gram).copied().unwrap_or(0));
        }
        let (numerator, denominator) = match cfg.smoothing {
            Smoothing::AddOne if n >= 2 => (matched + 1, total + 1),
            _ => (matched, total),
        };
        if numerator == 0 || denominator == 0 {
            return Ok(0.0);
        }
        log_precision_sum += (numerator as f64 / denominator as f64).ln();
    }
    let geometric_mean = (log_precision_sum / effective_n as f64).exp();

    let brevity_penalty = if hypothesis.len() < reference.len() {
        (1.0 - reference.len() as f64 / hypothesis.len() as f64).exp()
    } else {
        1.0
    };
    Ok(geometric_mean * brevity_penalty)
}

/// Recall weight for [`rouge_l`]'s F-measure.
const ROUGE_BETA: f64 = 1.2;

/// ROUGE-L: longest-common-subsequence F-measure with recall weighted
/// by beta = 1.2. Two empty sequences score 1; exactly one empty
/// scores 0.
pub fn rouge_l<T: Eq>(reference: &[T], hypothesis: &[T]) -> f64 {
    match (reference.is_empty(), hypothesis.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        (false, false) => {}
    }
    let lcs = lcs_length(reference, hypothesis);
    if lcs == 0 {
        return 0.0;
    }
    let precision = lcs as f64 / hypothesis.len() as f64;
    let recall = lcs as f64 / reference.len() as f64;
    let beta_sq = ROUGE_BETA * ROUGE_BETA;
    ((1.0 + beta_sq) * recall * precision) / (recall + beta_sq * precision)
}

fn lcs_length<T: Eq>(a: &[T], b: &[T]) -> usize {
    // One-row DP; O(|a|*|b|) time, O(|b|) space.
    let mut row = vec![0usize; b.len() + 1];
    for item_a in a {
        let mut diagonal = 0;
        for (j, item_b) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if item_a == item_b { diagonal + 1 } else { above.max(row[j]) };
            diagonal = above;
        }
    }
    row[b.len()]
}

/// Exact-match METEOR: greedy left-to-right unigram alignment, a
/// harmonic F-mean weighting recall 9:1 over precision, and a
/// fragmentation penalty `0.5 * (chunks / matches)^3`. Zero matches
/// (including two empty sequences) score 0. Equal sequences of length
/// m score `1 - 0.5 * (1/m)^3`.
pub fn meteor_lite<T: Eq>(reference: &[T], hypothesis: &[T]) -> f64 {
    if reference.is_empty() || hypothesis.is_empty() {
        return 0.0;
    }
    let mut taken = vec![false; reference.len()];
    // Pairs (hypothesis index, reference index), built in hypothesis
    // order; each side participates in at most one pair.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (h, token) in hypothesis.iter().enumerate() {
        let free_slot = reference
            .iter()
            .enumerate()
            .find(|(r, candidate)| !taken[*r] && *candidate == token)
            .map(|(r, _)| r);
        if let Some(r) = free_slot {
            taken[r] = true;
            pairs.push((h, r));
        }
    }
    let matches = pairs.len();
    if matches == 0 {
        return 0.0;
    }
    let precision = matches as f64 / hypothesis.len() as f64;
    let recall = matches as f64 / reference.len() as f64;
    let f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);

    let mut chunks = 1usize;
    for window in pairs.windows(2) {
        let (prev_h, prev_r) = window[0];
        let (h, r) = window[1];
        if h != prev_h + 1 || r != prev_r + 1 {
            chunks += 1;
        }
    }
    let penalty = 0.5 * (chunks as f64 / matches as f64).powi(3);
    f_mean * (1.0 - penalty)
}
