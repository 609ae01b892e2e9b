//! Reading and writing report corpora.
//!
//! A corpus is JSONL: one object per line, `{"id", "text"}` for free
//! text or `{"id", "report"}` for structured reports, where `report`
//! may be an inline object or a string of (possibly damaged) JSON that
//! goes through lenient parsing. Broken lines are collected as
//! per-line errors rather than aborting the read; only duplicate ids
//! (or a file with no usable line at all) are fatal. Everything
//! written out goes through typed serde structs with fixed field
//! order, so equal inputs produce byte-identical files.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::codec::{parse_lenient, parse_strict, serialize, RepairLog, ReportView};
use crate::nlg::Smoothing;
use crate::report::{normalize_name, StructuredReport};
use crate::score::{CorpusScores, ScoreConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    FreeText,
    Structured,
}

/// One usable corpus line. For structured records the payload is the
/// canonical serialization of the (repaired, validated) report and
/// `repair` says what it took to get there; for free text the payload
/// is the text as given.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRecord {
    pub id: String,
    pub kind: RecordKind,
    pub payload: String,
    pub repair: Option<RepairLog>,
}

/// A line that could not become a record, and why.
#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate id {id:?} on line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("no usable records in {path}: all {failed} line(s) failed")]
    AllLinesFailed { path: String, failed: usize },
    #[error("record {id:?} holds free text where a structured report was expected")]
    WrongKind { id: String },
}

/// Records in file order plus the lines that failed. Duplicate ids
/// abort the read; so does a file where every line is broken.
pub fn read_corpus(
    path: &Path,
    expected: RecordKind,
) -> Result<(Vec<CorpusRecord>, Vec<LineError>), CorpusError> {
    let raw = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;

    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();

    for (index, line) in raw.lines().enumerate() {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line, expected) {
            Ok(record) => match seen.entry(record.id.clone()) {
                Entry::Occupied(_) => {
                    return Err(CorpusError::DuplicateId { id: record.id, line: line_no });
                }
                Entry::Vacant(slot) => {
                    slot.insert(line_no);
                    records.push(record);
                }
            },
            Err(message) => errors.push(LineError { line: line_no, message }),
        }
    }

    if records.is_empty() && !errors.is_empty() {
        return Err(CorpusError::AllLinesFailed {
            path: path.display().to_string(),
            failed: errors.len(),
        });
    }
    Ok((records, errors))
}

fn parse_line(line: &str, expected: RecordKind) -> Result<CorpusRecord, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value.as_object().ok_or("line is not a JSON object")?;
    let id = obj
        .get("id")
        .and_then(Value::as_str)
        .ok_or("missing string \"id\" field")?
        .to_string();

    match expected {
        RecordKind::FreeText => {
            let text = obj
                .get("text")
                .and_then(Value::as_str)
                .ok_or("missing string \"text\" field")?;
            Ok(CorpusRecord {
                id,
                kind: RecordKind::FreeText,
                payload: text.to_string(),
                repair: None,
            })
        }
        RecordKind::Structured => {
            let report = obj.get("report").ok_or("missing \"report\" field")?;
            let raw = match report {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            let (parsed, log) =
                parse_lenient(&raw).map_err(|e| format!("unusable report: {e}"))?;
            let payload =
                serialize(&parsed).map_err(|e| format!("report does not validate: {e}"))?;
            Ok(CorpusRecord { id, kind: RecordKind::Structured, payload, repair: Some(log) })
        }
    }
}

/// Structured records as `(id, report)` pairs, in file order. A
/// free-text record is an error — extract it first.
pub fn records_to_reports(
    records: &[CorpusRecord],
) -> Result<Vec<(String, StructuredReport)>, CorpusError> {
    records
        .iter()
        .map(|record| {
            if record.kind != RecordKind::Structured {
                return Err(CorpusError::WrongKind { id: record.id.clone() });
            }
            let report =
                parse_strict(&record.payload).expect("stored payloads are canonical JSON");
            Ok((record.id.clone(), report))
        })
        .collect()
}

/// Inner join of two report sets on id, sorted by id, with the
/// leftovers of each side listed separately (also sorted).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pairing {
    pub pairs: Vec<(String, StructuredReport, StructuredReport)>,
    pub missing_in_hyps: Vec<String>,
    pub missing_in_refs: Vec<String>,
}

pub fn pair_by_id(
    refs: &[(String, StructuredReport)],
    hyps: &[(String, StructuredReport)],
) -> Pairing {
    let ref_map: BTreeMap<&str, &StructuredReport> =
        refs.iter().map(|(id, r)| (id.as_str(), r)).collect();
    let hyp_map: BTreeMap<&str, &StructuredReport> =
        hyps.iter().map(|(id, r)| (id.as_str(), r)).collect();

    let mut pairing = Pairing::default();
    for (id, reference) in &ref_map {
        match hyp_map.get(id) {
            Some(hypothesis) => pairing.pairs.push((
                id.to_string(),
                (*reference).clone(),
                (*hypothesis).clone(),
            )),
            None => pairing.missing_in_hyps.push(id.to_string()),
        }
    }
    for id in hyp_map.keys() {
        if !ref_map.contains_key(id) {
            pairing.missing_in_refs.push(id.to_string());
        }
    }
    pairing
}

#[derive(Serialize)]
struct ResultLine<'a> {
    id: &'a str,
    p_score: f64,
    d_score: f64,
    s_score: f64,
    p_pos: f64,
    p_neg: f64,
    per_finding: Vec<FindingLine<'a>>,
}

#[derive(Serialize)]
struct FindingLine<'a> {
    name: &'a str,
    matched: bool,
    s_prob: f64,
    s_level: f64,
    s_loc: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    count: usize,
    mean_p_score: Option<f64>,
    mean_d_score: Option<f64>,
    mean_s_score: Option<f64>,
    config: ConfigEcho<'a>,
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    weights: WeightsEcho,
    bleu: BleuEcho,
    lexicon_sha256: &'a str,
}

#[derive(Serialize)]
struct WeightsEcho {
    probability: f64,
    level: f64,
    location: f64,
}

#[derive(Serialize)]
struct BleuEcho {
    max_n: usize,
    smoothing: &'static str,
    clip_max_n_to_lengths: bool,
}

/// Writes per-pair scores as JSONL to `out_path` and a
/// `<stem>.summary.json` sidecar carrying the corpus means and the
/// exact configuration that produced them. Returns the sidecar path.
/// Output is byte-deterministic for equal inputs.
pub fn write_results(
    out_path: &Path,
    scores: &CorpusScores,
    config: &ScoreConfig,
    lexicon_sha256: &str,
) -> Result<PathBuf, std::io::Error> {
    let mut lines = String::new();
    for row in &scores.rows {
        let b = &row.breakdown;
        let line = ResultLine {
            id: &row.id,
            p_score: b.p_score,
            d_score: b.d_score,
            s_score: b.s_score,
            p_pos: b.p_pos,
            p_neg: b.p_neg,
            per_finding: b
                .per_finding
                .iter()
                .map(|f| FindingLine {
                    name: &f.name,
                    matched: f.matched,
                    s_prob: f.s_prob,
                    s_level: f.s_level,
                    s_loc: f.s_loc,
                })
                .collect(),
        };
        lines.push_str(&serde_json::to_string(&line).expect("result line serializes"));
        lines.push('\n');
    }
    fs::File::create(out_path)?.write_all(lines.as_bytes())?;

    let summary = Summary {
        count: scores.rows.len(),
        mean_p_score: scores.mean_p,
        mean_d_score: scores.mean_d,
        mean_s_score: scores.mean_s,
        config: ConfigEcho {
            weights: WeightsEcho {
                probability: config.weights.probability,
                level: config.weights.level,
                location: config.weights.location,
            },
            bleu: BleuEcho {
                max_n: config.bleu.max_n,
                smoothing: match config.bleu.smoothing {
                    Smoothing::None => "none",
                    Smoothing::AddOne => "add-one",
                },
                clip_max_n_to_lengths: config.bleu.clip_max_n_to_lengths,
            },
            lexicon_sha256,
        },
    };
    let summary_path = out_path.with_extension("summary.json");
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    fs::write(&summary_path, text)?;
    Ok(summary_path)
}

/// Writes reports as a structured corpus (`{"id", "report"}` lines,
/// canonical form). Fails on a report that does not validate.
pub fn write_reports(
    out_path: &Path,
    reports: &[(String, StructuredReport)],
) -> Result<(), CorpusError> {
    #[derive(Serialize)]
    struct Line<'a> {
        id: &'a str,
        report: ReportView<'a>,
    }
    let mut canonical = Vec::with_capacity(reports.len());
    for (id, report) in reports {
        let canon = crate::report::canonical_form(report).map_err(|e| CorpusError::Io {
            path: out_path.display().to_string(),
            source: std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("report {id:?} does not validate: {e}"),
            ),
        })?;
        canonical.push((id, canon));
    }
    let mut text = String::new();
    for (id, report) in &canonical {
        let line = Line { id, report: ReportView::new(report) };
        text.push_str(&serde_json::to_string(&line).expect("line serializes"));
        text.push('\n');
    }
    fs::write(out_path, text).map_err(|source| CorpusError::Io {
        path: out_path.display().to_string(),
        source,
    })
}

/// Writes `(id, text)` pairs as a free-text corpus (`{"id", "text"}`
/// lines).
pub fn write_texts(out_path: &Path, texts: &[(String, String)]) -> Result<(), std::io::Error> {
    #[derive(Serialize)]
    struct Line<'a> {
        id: &'a str,
        text: &'a str,
    }
    let mut out = String::new();
    for (id, text) in texts {
        let line = Line { id, text };
        out.push_str(&serde_json::to_string(&line).expect("line serializes"));
        out.push('\n');
    }
    fs::write(out_path, out)
}

/// Descriptive statistics over a set of structured reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub report_count: usize,
    /// How many reports mention each disease, positives and negatives
    /// together, by normalized name.
    pub disease_frequency: BTreeMap<String, usize>,
    /// Positive findings by probability value; a finding that omits
    /// probability counts as definite (3). Keys 1..=3 always present.
    pub probability_histogram: BTreeMap<u8, usize>,
    /// Positive findings by severity level; all four levels always
    /// present.
    pub level_histogram: BTreeMap<String, usize>,
    /// Fraction of positive findings that state a location; 0 when
    /// there are no positive findings.
    pub location_presence_rate: f64,
}

pub fn corpus_stats(reports: &[StructuredReport]) -> CorpusStats {
    let mut disease_frequency: BTreeMap<String, usize> = BTreeMap::new();
    let mut probability_histogram: BTreeMap<u8, usize> = (1..=3).map(|k| (k, 0)).collect();
    let mut level_histogram: BTreeMap<String, usize> =
        ["unspecified", "mild", "moderate", "severe"]
            .into_iter()
            .map(|k| (k.to_string(), 0))
            .collect();
    let mut positives = 0usize;
    let mut located = 0usize;

    for report in reports {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for finding in &report.positives {
            seen.insert(normalize_name(&finding.name));
            positives += 1;
            let bucket = finding.probability.map_or(3, |p| p.value());
            *probability_histogram.entry(bucket).or_insert(0) += 1;
            *level_histogram.entry(finding.level.as_str().to_string()).or_insert(0) += 1;
            if finding.location.is_some() {
                located += 1;
            }
        }
        for name in &report.negatives {
            seen.insert(normalize_name(name));
        }
        for name in seen {
            *disease_frequency.entry(name).or_insert(0) += 1;
        }
    }

    CorpusStats {
        report_count: reports.len(),
        disease_frequency,
        probability_histogram,
        level_histogram,
        location_presence_rate: if positives == 0 {
            0.0
        } else {
            located as f64 / positives as f64
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{PositiveFinding, ProbabilityScore, SeverityLevel};
    use crate::score::evaluate_corpus;

    fn write_temp(content: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        fs::write(&path, content).unwrap();
        (dir, path)
    }

    fn finding(name: &str, prob: Option<i64>, location: Option<&str>) -> PositiveFinding {
        PositiveFinding {
            name: name.to_string(),
            probability: prob.and_then(ProbabilityScore::new),
            level: SeverityLevel::Unspecified,
            location: location.map(str::to_string),
        }
    }

    #[test]
    fn reads_free_text_lines() {
        let (_dir, path) = write_temp(
            "{\"id\": \"r1\", \"text\": \"mild edema.\"}\n\n{\"id\": \"r2\", \"text\": \"clear.\"}\n",
        );
        let (records, errors) = read_corpus(&path, RecordKind::FreeText).unwrap();
        assert!(errors.is_empty());
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].id, "r1");
        assert_eq!(records[0].payload, "mild edema.");
        assert_eq!(records[0].repair, None);
    }

    #[test]
    fn reads_structured_lines_inline_and_embedded() {
        let (_dir, path) = write_temp(concat!(
            "{\"id\": \"a\", \"report\": {\"positives\": [{\"name\": \"edema\"}], \"negatives\": []}}\n",
            "{\"id\": \"b\", \"report\": \"{'positives': [], 'negatives': ['edema']}\"}\n",
        ));
        let (records, errors) = read_corpus(&path, RecordKind::Structured).unwrap();
        assert!(errors.is_empty());
        assert_eq!(records[0].payload, r#"{"positives":[{"name":"edema"}],"negatives":[]}"#);
        assert!(records[0].repair.as_ref().unwrap().is_clean());
        assert_eq!(records[1].payload, r#"{"positives":[],"negatives":["edema"]}"#);
        assert!(!records[1].repair.as_ref().unwrap().is_clean());
    }

    #[test]
    fn broken_lines_are_collected_not_fatal() {
        let (_dir, path) = write_temp(concat!(
            "{\"id\": \"ok\", \"text\": \"fine.\"}\n",
            "not json at all\n",
            "{\"id\": 7, \"text\": \"bad id\"}\n",
            "{\"text\": \"no id\"}\n",
        ));
        let (records, errors) = read_corpus(&path, RecordKind::FreeText).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(errors.len(), 3);
        assert_eq!(errors[0].line, 2);
        assert_eq!(errors[1].line, 3);
        assert_eq!(errors[2].line, 4);
    }

    #[test]
    fn duplicate_ids_are_fatal_and_name_the_line() {
        let (_dir, path) = write_temp(concat!(
            "{\"id\": \"x\", \"text\": \"one.\"}\n",
            "{\"id\": \"x\", \"text\": \"two.\"}\n",
        ));
        match read_corpus(&path, RecordKind::FreeText).unwrap_err() {
            CorpusError::DuplicateId { id, line } => {
                assert_eq!(id, "x");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn a_file_where_every_line_fails_is_an_error() {
        let (_dir, path) = write_temp("garbage\nmore garbage\n");
        assert!(matches!(
            read_corpus(&path, RecordKind::FreeText).unwrap_err(),
            CorpusError::AllLinesFailed { failed: 2, .. }
        ));
    }

    #[test]
    fn an_empty_file_is_an_empty_corpus() {
        let (_dir, path) = write_temp("");
        let (records, errors) = read_corpus(&path, RecordKind::FreeText).unwrap();
        assert!(records.is_empty());
        assert!(errors.is_empty());
    }

    #[test]
    fn missing_files_surface_as_io_errors() {
        let err = read_corpus(Path::new("/nonexistent/corpus.jsonl"), RecordKind::FreeText)
            .unwrap_err();
        assert!(matches!(err, CorpusError::Io { .. }));
    }

    #[test]
    fn records_convert_to_reports_only_when_structured() {
        let records = vec![CorpusRecord {
            id: "a".to_string(),
            kind: RecordKind::FreeText,
            payload: "edema.".to_string(),
            repair: None,
        }];
        assert!(matches!(
            records_to_reports(&records).unwrap_err(),
            CorpusError::WrongKind { .. }
        ));
    }

    #[test]
    fn pairing_joins_on_id_and_reports_leftovers() {
        let r = |name: &str| {
            StructuredReport::new(vec![finding(name, Some(3), None)], vec![])
        };
        let refs = vec![
            ("b".to_string(), r("edema")),
            ("a".to_string(), r("pneumonia")),
            ("only-ref".to_string(), r("fracture")),
        ];
        let hyps = vec![
            ("a".to_string(), r("pneumonia")),
            ("only-hyp".to_string(), r("edema")),
            ("b".to_string(), r("edema")),
        ];
        let pairing = pair_by_id(&refs, &hyps);
        let ids: Vec<&str> = pairing.pairs.iter().map(|(id, _, _)| id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b"]);
        assert_eq!(pairing.missing_in_hyps, vec!["only-ref".to_string()]);
        assert_eq!(pairing.missing_in_refs, vec!["only-hyp".to_string()]);
    }

    #[test]
    fn results_and_summary_are_byte_deterministic() {
        let reference = StructuredReport::new(
            vec![finding("edema", Some(2), Some("in the left lung"))],
            vec!["pneumothorax".to_string()],
        );
        let hypothesis = StructuredReport::new(
            vec![finding("edema", Some(3), Some("in the left lung"))],
            vec![],
        );
        let pairs = vec![
            ("r2".to_string(), reference.clone(), hypothesis.clone()),
            ("r1".to_string(), reference.clone(), reference.clone()),
        ];
        let config = ScoreConfig::default();
        let scores = evaluate_corpus(&pairs, &config).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results.jsonl");
        let summary_path = write_results(&out, &scores, &config, "deadbeef").unwrap();
        assert_eq!(summary_path, dir.path().join("results.summary.json"));
        let first = fs::read(&out).unwrap();
        let first_summary = fs::read(&summary_path).unwrap();

        write_results(&out, &scores, &config, "deadbeef").unwrap();
        assert_eq!(fs::read(&out).unwrap(), first);
        assert_eq!(fs::read(&summary_path).unwrap(), first_summary);

        let text = String::from_utf8(first).unwrap();
        let mut lines = text.lines();
        let line1: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert_eq!(line1["id"], "r1");
        assert_eq!(line1["s_score"], 1.0);
        let line2: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert_eq!(line2["id"], "r2");

        let summary: Value =
            serde_json::from_str(&String::from_utf8(first_summary).unwrap()).unwrap();
        assert_eq!(summary["count"], 2);
        assert_eq!(summary["config"]["lexicon_sha256"], "deadbeef");
        assert_eq!(summary["config"]["bleu"]["max_n"], 4);
        assert_eq!(summary["config"]["bleu"]["smoothing"], "add-one");
    }

    #[test]
    fn summary_of_an_empty_corpus_has_null_means() {
        let scores = evaluate_corpus(&[], &ScoreConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results.jsonl");
        let summary_path = write_results(&out, &scores, &ScoreConfig::default(), "x").unwrap();
        let summary: Value =
            serde_json::from_str(&fs::read_to_string(summary_path).unwrap()).unwrap();
        assert_eq!(summary["count"], 0);
        assert!(summary["mean_s_score"].is_null());
        assert_eq!(fs::read_to_string(out).unwrap(), "");
    }

    #[test]
    fn written_reports_read_back_identically() {
        let reports = vec![
            (
                "a".to_string(),
                StructuredReport::new(
                    vec![finding("Edema", Some(2), Some("in the left lung"))],
                    vec!["fracture".to_string()],
                ),
            ),
            ("b".to_string(), StructuredReport::default()),
        ];
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("reports.jsonl");
        write_reports(&out, &reports).unwrap();
        let (records, errors) = read_corpus(&out, RecordKind::Structured).unwrap();
        assert!(errors.is_empty());
        let read_back = records_to_reports(&records).unwrap();
        assert_eq!(read_back[0].1, crate::report::canonical_form(&reports[0].1).unwrap());
        assert_eq!(read_back[1].1, reports[1].1);
    }

    #[test]
    fn written_texts_read_back_identically() {
        let texts = vec![
            ("a".to_string(), "mild edema. no pneumothorax.".to_string()),
            ("b".to_string(), String::new()),
        ];
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("texts.jsonl");
        write_texts(&out, &texts).unwrap();
        let (records, errors) = read_corpus(&out, RecordKind::FreeText).unwrap();
        assert!(errors.is_empty());
        let read_back: Vec<(String, String)> =
            records.into_iter().map(|r| (r.id, r.payload)).collect();
        assert_eq!(read_back, texts);
    }

    #[test]
    fn stats_count_names_probabilities_levels_and_locations() {
        let reports = vec![
            StructuredReport::new(
                vec![
                    PositiveFinding {
                        name: "Edema".to_string(),
                        probability: ProbabilityScore::new(2),
                        level: SeverityLevel::Mild,
                        location: Some("in the left lung".to_string()),
                    },
                    finding("pneumonia", None, None),
                ],
                vec!["pneumothorax".to_string()],
            ),
            StructuredReport::new(
                vec![finding("edema", Some(1), None)],
                vec!["edema".to_string()],
            ),
        ];
        let stats = corpus_stats(&reports);
        assert_eq!(stats.report_count, 2);
        assert_eq!(stats.disease_frequency["edema"], 2);
        assert_eq!(stats.disease_frequency["pneumonia"], 1);
        assert_eq!(stats.disease_frequency["pneumothorax"], 1);
        assert_eq!(stats.probability_histogram[&1], 1);
        assert_eq!(stats.probability_histogram[&2], 1);
        // The probability-less finding lands in the definite bucket.
        assert_eq!(stats.probability_histogram[&3], 1);
        assert_eq!(stats.level_histogram["mild"], 1);
        assert_eq!(stats.level_histogram["unspecified"], 2);
        assert_eq!(stats.level_histogram["severe"], 0);
        assert!((stats.location_presence_rate - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn stats_on_nothing_are_all_zero() {
        let stats = corpus_stats(&[]);
        assert_eq!(stats.report_count, 0);
        assert!(stats.disease_frequency.is_empty());
        assert_eq!(stats.probability_histogram.values().sum::<usize>(), 0);
        assert_eq!(stats.location_presence_rate, 0.0);
    }
}
