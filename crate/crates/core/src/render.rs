//! Renders structured reports back into template sentences.
//!
//! Positive findings become `"there {hedge} {verb} {level} {name}
//! {location}."` with empty slots skipped; ruled-out diseases become
//! `"no evidence of {name}."`. The hedge wording per probability
//! value deliberately mirrors the extraction lexicon, so a rendered
//! sentence re-extracts to the finding it came from.

use std::collections::BTreeMap;

use crate::report::{normalize_name, PositiveFinding, ProbabilityScore, StructuredReport};

/// Hedge wording for each probability value: the hedge word (may be
/// empty) and the verb that follows it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HedgeTable {
    rows: [(String, String); 3],
}

impl Default for HedgeTable {
    fn default() -> Self {
        HedgeTable {
            rows: [
                ("might".to_string(), "be".to_string()),
                ("may".to_string(), "be".to_string()),
                (String::new(), "is".to_string()),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("hedge table must define exactly the rows 1, 2, and 3; got {got:?}")]
pub struct BadHedgeTable {
    pub got: Vec<u8>,
}

impl HedgeTable {
    /// Builds a table from per-probability `(hedge, verb)` rows; the
    /// map must cover exactly the keys 1, 2, and 3.
    pub fn try_from_map(rows: &BTreeMap<u8, (String, String)>) -> Result<Self, BadHedgeTable> {
        let keys: Vec<u8> = rows.keys().copied().collect();
        if keys != [1, 2, 3] {
            return Err(BadHedgeTable { got: keys });
        }
        let get = |k: u8| rows[&k].clone();
        Ok(HedgeTable { rows: [get(1), get(2), get(3)] })
    }

    /// Row for a probability; an absent probability reads as definite.
    fn row(&self, probability: Option<ProbabilityScore>) -> (&str, &str) {
        let value = probability.map_or(3, ProbabilityScore::value);
        let (hedge, verb) = &self.rows[value as usize - 1];
        (hedge, verb)
    }
}

/// One sentence for a positive finding. Never fails; whatever the
/// finding holds is verbalized as-is.
pub fn render_positive(finding: &PositiveFinding, table: &HedgeTable) -> String {
    let (hedge, verb) = table.row(finding.probability);
    let mut parts: Vec<&str> = vec!["there"];
    if !hedge.is_empty() {
        parts.push(hedge);
    }
    parts.push(verb);
    if finding.level.is_graded() {
        parts.push(finding.level.as_str());
    }
    parts.push(&finding.name);
    if let Some(location) = finding.location.as_deref() {
        if !location.is_empty() {
            parts.push(location);
        }
    }
    let mut sentence = parts.join(" ");
    sentence.push('.');
    sentence
}

/// One sentence for a ruled-out disease.
pub fn render_negative(name: &str) -> String {
    format!("no evidence of {name}.")
}

/// Whole report as one line: positive sentences first, then negative
/// ones, each group ordered by normalized disease name, joined by
/// single spaces. An empty report renders to an empty string.
pub fn render_report(report: &StructuredReport, table: &HedgeTable) -> String {
    let mut positives: Vec<&PositiveFinding> = report.positives.iter().collect();
    positives.sort_by_key(|f| normalize_name(&f.name));
    let mut negatives: Vec<&str> = report.negatives.iter().map(String::as_str).collect();
    negatives.sort_by_key(|n| normalize_name(n));

    let sentences: Vec<String> = positives
        .into_iter()
        .map(|f| render_positive(f, table))
        .chain(negatives.into_iter().map(render_negative))
        .collect();
    sentences.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::SeverityLevel;

    fn finding(
        name: &str,
        probability: Option<i64>,
        level: SeverityLevel,
        location: Option<&str>,
    ) -> PositiveFinding {
        PositiveFinding {
            name: name.to_string(),
            probability: probability.map(|p| ProbabilityScore::new(p).unwrap()),
            level,
            location: location.map(str::to_string),
        }
    }

    #[test]
    fn each_probability_gets_its_own_hedge() {
        let table = HedgeTable::default();
        let at = |p| render_positive(&finding("edema", Some(p), SeverityLevel::Unspecified, None), &table);
        assert_eq!(at(1), "there might be edema.");
        assert_eq!(at(2), "there may be edema.");
        assert_eq!(at(3), "there is edema.");
    }

    #[test]
    fn absent_probability_reads_as_definite() {
        let table = HedgeTable::default();
        let sentence =
            render_positive(&finding("edema", None, SeverityLevel::Unspecified, None), &table);
        assert_eq!(sentence, "there is edema.");
    }

    #[test]
    fn level_and_location_fill_their_slots() {
        let table = HedgeTable::default();
        let full = finding(
            "edema",
            Some(1),
            SeverityLevel::Mild,
            Some("in the left lower lobe"),
        );
        assert_eq!(
            render_positive(&full, &table),
            "there might be mild edema in the left lower lobe."
        );
    }

    #[test]
    fn empty_location_string_is_skipped() {
        let table = HedgeTable::default();
        let f = finding("edema", Some(3), SeverityLevel::Unspecified, Some(""));
        assert_eq!(render_positive(&f, &table), "there is edema.");
    }

    #[test]
    fn negative_sentence_shape() {
        assert_eq!(render_negative("pneumothorax"), "no evidence of pneumothorax.");
    }

    #[test]
    fn report_orders_groups_and_sorts_by_name() {
        let report = StructuredReport::new(
            vec![
                finding("pneumonia", Some(2), SeverityLevel::Unspecified, None),
                finding("edema", Some(3), SeverityLevel::Mild, None),
            ],
            vec!["Pneumothorax".to_string(), "fracture".to_string()],
        );
        assert_eq!(
            render_report(&report, &HedgeTable::default()),
            "there is mild edema. there may be pneumonia. \
             no evidence of fracture. no evidence of Pneumothorax."
        );
    }

    #[test]
    fn empty_report_renders_to_an_empty_string() {
        assert_eq!(render_report(&StructuredReport::default(), &HedgeTable::default()), "");
    }

    #[test]
    fn custom_tables_must_cover_rows_one_to_three() {
        let mut rows = BTreeMap::new();
        rows.insert(1u8, ("possibly".to_string(), "be".to_string()));
        assert!(HedgeTable::try_from_map(&rows).is_err());
        rows.insert(2, ("probably".to_string(), "be".to_string()));
        rows.insert(3, (String::new(), "is".to_string()));
        let table = HedgeTable::try_from_map(&rows).unwrap();
        let sentence =
            render_positive(&finding("edema", Some(1), SeverityLevel::Unspecified, None), &table);
        assert_eq!(sentence, "there possibly be edema.");
        rows.insert(4, ("surely".to_string(), "is".to_string()));
        assert!(HedgeTable::try_from_map(&rows).is_err());
    }

    #[test]
    fn rendered_text_never_has_double_spaces() {
        let report = StructuredReport::new(
            vec![
                finding("edema", None, SeverityLevel::Unspecified, None),
                finding("pneumonia", Some(3), SeverityLevel::Severe, Some("in both lungs")),
            ],
            vec!["fracture".to_string()],
        );
        let text = render_report(&report, &HedgeTable::default());
        assert!(!text.contains("  "), "{text:?}");
    }

    #[test]
    fn rendered_sentences_extract_back_to_the_same_finding() {
        let lexicon = crate::extraction::KeywordLexicon::bundled();
        let report = StructuredReport::new(
            vec![
                finding("edema", Some(2), SeverityLevel::Mild, Some("in the left lung")),
                finding("pneumothorax", Some(1), SeverityLevel::Unspecified, None),
            ],
            vec!["pneumonia".to_string()],
        );
        let text = render_report(&report, &HedgeTable::default());
        let recovered = crate::extraction::extract_report(
            &text,
            lexicon,
            &crate::extraction::IdentityRewriter,
        );
        assert_eq!(recovered.positives.len(), 2);
        let edema = recovered.positives.iter().find(|f| f.name == "edema").unwrap();
        assert_eq!(edema.probability.map(|p| p.value()), Some(2));
        assert_eq!(edema.level, SeverityLevel::Mild);
        let ptx = recovered.positives.iter().find(|f| f.name == "pneumothorax").unwrap();
        assert_eq!(ptx.probability.map(|p| p.value()), Some(1));
        assert_eq!(recovered.negatives, vec!["pneumonia".to_string()]);
    }
}
