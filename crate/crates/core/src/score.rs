//! The scoring side of the crate: how close is a hypothesis report to
//! a reference report?
//!
//! Two halves, averaged into one number. The presence half
//! ([`p_score`]) asks whether the right diseases were asserted and
//! ruled out, as set-F1 over the positive and negative name sets. The
//! detail half ([`d_score`]) walks the union of positive names and,
//! for names both reports assert, scores how well probability,
//! severity, and location agree; a name missing from either side
//! contributes zero, so detail credit is gated on getting the disease
//! itself right. [`s_score`] is the mean of the two halves.

use std::collections::{BTreeMap, BTreeSet};

use crate::extraction::tokenize;
use crate::nlg::{bleu, BleuConfig};
use crate::report::{normalize_name, PositiveFinding, ProbabilityScore, SeverityLevel, StructuredReport};

/// F1 between two sets of names. Two empty sets agree perfectly (1);
/// one empty set against a non-empty one scores 0; disjoint non-empty
/// sets score 0.
pub fn set_f1(reference: &BTreeSet<String>, hypothesis: &BTreeSet<String>) -> f64 {
    if reference.is_empty() && hypothesis.is_empty() {
        return 1.0;
    }
    if reference.is_empty() || hypothesis.is_empty() {
        return 0.0;
    }
    let tp = reference.intersection(hypothesis).count() as f64;
    let precision = tp / hypothesis.len() as f64;
    let recall = tp / reference.len() as f64;
    if precision + recall == 0.0 {
        return 0.0;
    }
    2.0 * precision * recall / (precision + recall)
}

fn positive_names(report: &StructuredReport) -> BTreeSet<String> {
    report.positives.iter().map(|f| normalize_name(&f.name)).collect()
}

fn negative_names(report: &StructuredReport) -> BTreeSet<String> {
    report.negatives.iter().map(|n| normalize_name(n)).collect()
}

/// Presence score: `(positive set-F1, negative set-F1, their mean)`.
pub fn p_score(reference: &StructuredReport, hypothesis: &StructuredReport) -> (f64, f64, f64) {
    let pos = set_f1(&positive_names(reference), &positive_names(hypothesis));
    let neg = set_f1(&negative_names(reference), &negative_names(hypothesis));
    (pos, neg, (pos + neg) / 2.0)
}

/// Probability agreement on the 0/½/1 scale: `1 − (u_ref − u_hyp)²`.
/// A reference that omits probability is read as definite; a
/// hypothesis that omits it gets no credit.
pub fn s_prob(reference: Option<ProbabilityScore>, hypothesis: Option<ProbabilityScore>) -> f64 {
    let Some(hyp) = hypothesis else { return 0.0 };
    let r = reference.map_or(1.0, ProbabilityScore::unit_interval);
    let h = hyp.unit_interval();
    1.0 - (r - h) * (r - h)
}

/// Severity agreement: exact match, where two unspecified levels also
/// match.
pub fn s_level(reference: SeverityLevel, hypothesis: SeverityLevel) -> f64 {
    if reference == hypothesis {
        1.0
    } else {
        0.0
    }
}

/// Location agreement: both absent is perfect, a location missing
/// from one side only scores 0, and two stated locations compare by
/// BLEU over their token sequences.
pub fn s_loc(reference: Option<&str>, hypothesis: Option<&str>, bleu_config: BleuConfig) -> f64 {
    match (reference, hypothesis) {
        (None, None) => 1.0,
        (None, Some(_)) | (Some(_), None) => 0.0,
        (Some(r), Some(h)) => {
            let ref_tokens = tokenize(r);
            let hyp_tokens = tokenize(h);
            if ref_tokens.is_empty() {
                return if hyp_tokens.is_empty() { 1.0 } else { 0.0 };
            }
            bleu(&ref_tokens, &hyp_tokens, bleu_config).unwrap_or(0.0)
        }
    }
}

/// Relative weight of each detail sub-score; must be non-negative and
/// sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetailWeights {
    pub probability: f64,
    pub level: f64,
    pub location: f64,
}

impl Default for DetailWeights {
    fn default() -> Self {
        DetailWeights { probability: 1.0 / 3.0, level: 1.0 / 3.0, location: 1.0 / 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WeightError {
    #[error("detail weights must be non-negative, got {0}")]
    Negative(f64),
    #[error("detail weights must sum to 1, got {0}")]
    BadSum(f64),
}

impl DetailWeights {
    pub fn new(probability: f64, level: f64, location: f64) -> Result<Self, WeightError> {
        for w in [probability, level, location] {
            if !(w >= 0.0) {
                return Err(WeightError::Negative(w));
            }
        }
        let sum = probability + level + location;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(WeightError::BadSum(sum));
        }
        Ok(DetailWeights { probability, level, location })
    }
}

/// Everything configurable about scoring.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoreConfig {
    pub weights: DetailWeights,
    pub bleu: BleuConfig,
}

/// Detail sub-scores for one name in the positive-name union. For a
/// name missing from either report, `matched` is false and all three
/// sub-scores are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FindingScore {
    pub name: String,
    pub matched: bool,
    pub s_prob: f64,
    pub s_level: f64,
    pub s_loc: f64,
}

/// Detail score: weighted sub-score sums averaged over the union of
/// positive names, zero for unmatched names. An empty union (neither
/// report asserts anything) scores 1. Rows come back sorted by name.
pub fn d_score(
    reference: &StructuredReport,
    hypothesis: &StructuredReport,
    config: &ScoreConfig,
) -> (f64, Vec<FindingScore>) {
    let by_name = |report: &StructuredReport| -> BTreeMap<String, PositiveFinding> {
        let mut map = BTreeMap::new();
        for finding in &report.positives {
            map.entry(normalize_name(&finding.name)).or_insert_with(|| finding.clone());
        }
        map
    };
    let ref_map = by_name(reference);
    let hyp_map = by_name(hypothesis);

    let union: BTreeSet<&String> = ref_map.keys().chain(hyp_map.keys()).collect();
    if union.is_empty() {
        return (1.0, Vec::new());
    }

    let mut rows = Vec::with_capacity(union.len());
    let mut total = 0.0;
    for name in union {
        let row = match (ref_map.get(name), hyp_map.get(name)) {
            (Some(r), Some(h)) => {
                let row = FindingScore {
                    name: name.clone(),
                    matched: true,
                    s_prob: s_prob(r.probability, h.probability),
                    s_level: s_level(r.level, h.level),
                    s_loc: s_loc(r.location.as_deref(), h.location.as_deref(), config.bleu),
                };
                total += config.weights.probability * row.s_prob
                    + config.weights.level * row.s_level
                    + config.weights.location * row.s_loc;
                row
            }
            _ => FindingScore {
                name: name.clone(),
                matched: false,
                s_prob: 0.0,
                s_level: 0.0,
                s_loc: 0.0,
            },
        };
        rows.push(row);
    }
    let count = rows.len() as f64;
    (total / count, rows)
}

/// Full comparison of one hypothesis report to its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBreakdown {
    pub p_pos: f64,
    pub p_neg: f64,
    pub p_score: f64,
    pub d_score: f64,
    pub s_score: f64,
    pub per_finding: Vec<FindingScore>,
}

/// The headline metric: mean of presence and detail scores.
pub fn s_score(
    reference: &StructuredReport,
    hypothesis: &StructuredReport,
    config: &ScoreConfig,
) -> ScoreBreakdown {
    let (p_pos, p_neg, p) = p_score(reference, hypothesis);
    let (d, per_finding) = d_score(reference, hypothesis, config);
    ScoreBreakdown {
        p_pos,
        p_neg,
        p_score: p,
        d_score: d,
        s_score: (p + d) / 2.0,
        per_finding,
    }
}

/// Score for one reference/hypothesis pair in a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub id: String,
    pub breakdown: ScoreBreakdown,
}

/// Per-pair scores (sorted by id) plus corpus means; the means are
/// `None` for an empty corpus.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusScores {
    pub rows: Vec<ScoredPair>,
    pub mean_p: Option<f64>,
    pub mean_d: Option<f64>,
    pub mean_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvaluateError {
    #[error("duplicate report id {0:?}")]
    DuplicateId(String),
}

/// Scores every `(id, reference, hypothesis)` triple. Ids must be
/// unique; output rows are sorted by id regardless of input order.
pub fn evaluate_corpus(
    pairs: &[(String, StructuredReport, StructuredReport)],
    config: &ScoreConfig,
) -> Result<CorpusScores, EvaluateError> {
    let mut seen = BTreeSet::new();
    for (id, _, _) in pairs {
        if !seen.insert(id.as_str()) {
            return Err(EvaluateError::DuplicateId(id.clone()));
        }
    }
    let mut rows: Vec<ScoredPair> = pairs
        .iter()
        .map(|(id, reference, hypothesis)| ScoredPair {
            id: id.clone(),
            breakdown: s_score(reference, hypothesis, config),
        })
        .collect();
    rows.sort_by(|a, b| a.id.cmp(&b.id));

    let count = rows.len() as f64;
    let mean = |pick: fn(&ScoreBreakdown) -> f64| -> Option<f64> {
        if rows.is_empty() {
            None
        } else {
            Some(rows.iter().map(|r| pick(&r.breakdown)).sum::<f64>() / count)
        }
    };
    Ok(CorpusScores {
        mean_p: mean(|b| b.p_score),
        mean_d: mean(|b| b.d_score),
        mean_s: mean(|b| b.s_score),
        rows,
    })
}
