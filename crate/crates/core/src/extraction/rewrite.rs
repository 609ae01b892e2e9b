//! Location rephrasing: turns terse location keywords ("lung right
//! lower") into report-style prose ("in the lower zone of the right
//! lung").
//!
//! Rephrasing is pluggable because it is the one extraction step where
//! fancier backends are plausible. The bundled implementations are a
//! deterministic rule table ([`RuleRewriter`]) and a no-op
//! ([`IdentityRewriter`]); anything implementing [`LocationRewriter`]
//! slots in. The trait requires `Send + Sync` so the pipeline may call
//! it from parallel workers.

use super::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("location rewrite failed: {0}")]
pub struct RewriteError(pub String);

pub trait LocationRewriter: Send + Sync {
    fn rewrite(&self, phrase: &str) -> Result<String, RewriteError>;
}

/// Passes phrases through untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityRewriter;

impl LocationRewriter for IdentityRewriter {
    fn rewrite(&self, phrase: &str) -> Result<String, RewriteError> {
        Ok(phrase.to_string())
    }
}

/// Fixed-phrase replacements tried before the generic rules.
const EXACT_REWRITES: &[(&str, &str)] = &[
    ("retrocardiac", "in the retrocardiac region"),
    ("perihilar", "in the perihilar region"),
    ("bibasilar", "at the lung bases"),
    ("lung bases", "at the lung bases"),
    ("left base", "at the left base"),
    ("right base", "at the right base"),
    ("left apex", "at the left apex"),
    ("right apex", "at the right apex"),
    ("bilateral", "in both lungs"),
    ("left costophrenic angle", "at the left costophrenic angle"),
    ("right costophrenic angle", "at the right costophrenic angle"),
];

const PREPOSITIONS: &[&str] =
    &["in", "at", "on", "near", "within", "along", "of", "behind", "above", "below", "around"];

/// Deterministic rule-table rewriter. In order:
///
/// 1. exact-phrase table (anatomy that needs its own preposition);
/// 2. organ/side/zone keyword triples in any order become
///    "in the {zone} zone of the {side} lung";
/// 3. phrases already led by a preposition pass through unchanged;
/// 4. everything else gains "in the " (or just "in " before an
///    article).
///
/// Outputs always start with a preposition, so the rewriter is
/// idempotent.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleRewriter;

impl LocationRewriter for RuleRewriter {
    fn rewrite(&self, phrase: &str) -> Result<String, RewriteError> {
        let tokens = tokenize(phrase);
        if tokens.is_empty() {
            return Ok(phrase.to_string());
        }
        let joined = tokens.join(" ");

        for (from, to) in EXACT_REWRITES {
            if joined == *from {
                return Ok((*to).to_string());
            }
        }

        if let Some(rephrased) = reorder_organ_side_zone(&tokens) {
            return Ok(rephrased);
        }

        if PREPOSITIONS.contains(&tokens[0].as_str()) {
            return Ok(phrase.to_string());
        }
        if tokens[0] == "the" {
            return Ok(format!("in {joined}"));
        }
        Ok(format!("in the {joined}"))
    }
}

/// Matches token sets like {"lung", "right", "lower"} regardless of
/// order and rebuilds them as prose.
fn reorder_organ_side_zone(tokens: &[String]) -> Option<String> {
    if tokens.len() != 3 {
        return None;
    }
    let mut side = None;
    let mut zone = None;
    let mut organ_seen = false;
    for token in tokens {
        match token.as_str() {
            "lung" | "lungs" => organ_seen = true,
            "left" | "right" => side = Some(token.as_str()),
            "upper" | "lower" => zone = Some(token.as_str()),
            "middle" | "mid" => zone = Some("middle"),
            _ => return None,
        }
    }
    match (organ_seen, side, zone) {
        (true, Some(side), Some(zone)) => Some(format!("in the {zone} zone of the {side} lung")),
        _ => None,
    }
}

/// Applies a rewriter with identity fallback: a failing rewriter logs
/// a warning and the original phrase survives, because a lost location
/// is worse than an unpolished one.
pub fn rephrase_location(phrase: &str, rewriter: &dyn LocationRewriter) -> String {
    match rewriter.rewrite(phrase) {
        Ok(rephrased) => rephrased,
        Err(e) => {
            log::warn!("location rewriter failed on {phrase:?}: {e}; keeping the phrase as-is");
            phrase.to_string()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_triple_is_reordered_into_prose() {
        let out = RuleRewriter.rewrite("lung right lower").unwrap();
        assert_eq!(out, "in the lower zone of the right lung");
        assert_eq!(RuleRewriter.rewrite("upper left lung").unwrap(), "in the upper zone of the left lung");
    }

    #[test]
    fn plain_phrases_gain_a_preposition() {
        assert_eq!(RuleRewriter.rewrite("left lower lobe").unwrap(), "in the left lower lobe");
        assert_eq!(RuleRewriter.rewrite("the right lung").unwrap(), "in the right lung");
    }

    #[test]
    fn prepositioned_phrases_pass_through() {
        for phrase in ["in the left lower lobe", "at the right base", "near the diaphragm"] {
            assert_eq!(RuleRewriter.rewrite(phrase).unwrap(), phrase);
        }
    }

    #[test]
    fn exact_table_beats_generic_rules() {
        assert_eq!(RuleRewriter.rewrite("retrocardiac").unwrap(), "in the retrocardiac region");
        assert_eq!(RuleRewriter.rewrite("bilateral").unwrap(), "in both lungs");
        assert_eq!(RuleRewriter.rewrite("lung bases").unwrap(), "at the lung bases");
    }

    #[test]
    fn rule_rewriter_is_idempotent_on_its_outputs() {
        for phrase in ["lung right lower", "left lower lobe", "bilateral", "retrocardiac", "chest wall"] {
            let once = RuleRewriter.rewrite(phrase).unwrap();
            assert_eq!(RuleRewriter.rewrite(&once).unwrap(), once, "phrase {phrase:?}");
        }
    }

    #[test]
    fn identity_rewriter_changes_nothing() {
        assert_eq!(IdentityRewriter.rewrite("lung right lower").unwrap(), "lung right lower");
    }

    #[test]
    fn failing_rewriter_falls_back_to_the_input() {
        struct Broken;
        impl LocationRewriter for Broken {
            fn rewrite(&self, _phrase: &str) -> Result<String, RewriteError> {
                Err(RewriteError("backend offline".into()))
            }
        }
        assert_eq!(rephrase_location("left lung", &Broken), "left lung");
    }
}
