//! JSON codec for structured reports.
//!
//! [`parse_strict`] accepts exactly one JSON object and applies a few
//! forgiving coercions (numeric strings, integral floats, unknown
//! keys) before validating. [`parse_lenient`] first runs the same
//! input through [`repair`], which patches the JSON damage language
//! models actually produce: prose wrappers, single quotes, bare keys,
//! trailing commas, unclosed containers, truncated tails.
//! [`serialize`] writes the canonical form with a fixed field order,
//! so equal reports always serialize to identical bytes.

mod repair;

pub use repair::{repair, RepairLog, RepairRule};

use serde::Serialize;
use serde_json::Value;

use crate::report::{
    canonical_form, validate, FindingDraft, InvalidReport, IssueKind, ReportDraft,
    StructuredReport, ValidationIssue,
};

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("invalid JSON: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error(transparent)]
    Schema(#[from] InvalidReport),
}

/// Parses a JSON document that must already be syntactically valid.
/// Tolerated deviations, each logged at warn level: unknown keys are
/// ignored, a missing `positives`/`negatives` key means an empty list,
/// probabilities given as numeric strings or integral floats are
/// coerced, and an empty-string location is treated as absent.
/// Finding order is preserved as written.
pub fn parse_strict(text: &str) -> Result<StructuredReport, ParseError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let draft = draft_from_value(&value)?;
    let issues = validate(&draft);
    if !issues.is_empty() {
        return Err(InvalidReport { issues }.into());
    }
    Ok(StructuredReport::from_draft(&draft).expect("validated draft converts"))
}

/// [`repair`] followed by [`parse_strict`]. The error keeps the repair
/// log so callers can see what was attempted.
pub fn parse_lenient(text: &str) -> Result<(StructuredReport, RepairLog), LenientError> {
    let (repaired, log) = repair(text);
    match parse_strict(&repaired) {
        Ok(report) => Ok((report, log)),
        Err(source) => Err(LenientError { log, source }),
    }
}

/// Input that stayed unusable even after [`repair`].
#[derive(Debug, thiserror::Error)]
#[error("report could not be recovered: {source}")]
pub struct LenientError {
    pub log: RepairLog,
    #[source]
    pub source: ParseError,
}

/// Canonical JSON for a report: findings sorted by normalized name,
/// fields in `name`, `probability`, `level`, `location` order, absent
/// probability/location omitted, ungraded level omitted. Compact (no
/// whitespace), hence byte-deterministic for equal reports.
pub fn serialize(report: &StructuredReport) -> Result<String, InvalidReport> {
    let canonical = canonical_form(report)?;
    Ok(serde_json::to_string(&ReportView::new(&canonical)).expect("view serializes"))
}

/// Serializable projection of a canonical report; field order here is
/// the on-wire order.
#[derive(Serialize)]
pub(crate) struct ReportView<'a> {
    positives: Vec<FindingView<'a>>,
    negatives: &'a [String],
}

#[derive(Serialize)]
struct FindingView<'a> {
    name: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    probability: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    level: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    location: Option<&'a str>,
}

impl<'a> ReportView<'a> {
    /// `report` is expected to already be in canonical form; the view
    /// serializes it as-is.
    pub(crate) fn new(report: &'a StructuredReport) -> Self {
        ReportView {
            positives: report
                .positives
                .iter()
                .map(|f| FindingView {
                    name: &f.name,
                    probability: f.probability.map(|p| p.value()),
                    level: f.level.is_graded().then(|| f.level.as_str()),
                    location: f.location.as_deref(),
                })
                .collect(),
            negatives: &report.negatives,
        }
    }
}

const KNOWN_REPORT_KEYS: [&str; 2] = ["positives", "negatives"];
const KNOWN_FINDING_KEYS: [&str; 4] = ["name", "probability", "level", "location"];

fn issue(path: String, message: impl Into<String>) -> ValidationIssue {
    ValidationIssue { path, kind: IssueKind::BadEnum, message: message.into() }
}

fn draft_from_value(value: &Value) -> Result<ReportDraft, InvalidReport> {
    let Some(map) = value.as_object() else {
        return Err(InvalidReport {
            issues: vec![ValidationIssue {
                path: "report".to_string(),
                kind: IssueKind::MissingField,
                message: "top-level value must be a JSON object".to_string(),
            }],
        });
    };
    for key in map.keys() {
        if !KNOWN_REPORT_KEYS.contains(&key.as_str()) {
            log::warn!("ignoring unknown report key {key:?}");
        }
    }

    let mut issues = Vec::new();
    let mut draft = ReportDraft::default();

    match map.get("positives") {
        None | Some(Value::Null) => log::warn!("no \"positives\" key; defaulting to empty"),
        Some(Value::Array(entries)) => {
            for (i, entry) in entries.iter().enumerate() {
                match entry.as_object() {
                    Some(fields) => {
                        draft.positives.push(finding_from_value(fields, i, &mut issues));
                    }
                    None => issues.push(issue(
                        format!("positives[{i}]"),
                        "expected an object describing one finding",
                    )),
                }
            }
        }
        Some(_) => issues.push(issue("positives".to_string(), "expected an array")),
    }

    match map.get("negatives") {
        None | Some(Value::Null) => log::warn!("no \"negatives\" key; defaulting to empty"),
        Some(Value::Array(entries)) => {
            for (i, entry) in entries.iter().enumerate() {
                match entry.as_str() {
                    Some(name) => draft.negatives.push(name.to_string()),
                    None => issues.push(issue(
                        format!("negatives[{i}]"),
                        "expected a disease name string",
                    )),
                }
            }
        }
        Some(_) => issues.push(issue("negatives".to_string(), "expected an array")),
    }

    if issues.is_empty() {
        Ok(draft)
    } else {
        Err(InvalidReport { issues })
    }
}

fn finding_from_value(
    fields: &serde_json::Map<String, Value>,
    index: usize,
    issues: &mut Vec<ValidationIssue>,
) -> FindingDraft {
    for key in fields.keys() {
        if !KNOWN_FINDING_KEYS.contains(&key.as_str()) {
            log::warn!("ignoring unknown finding key {key:?} in positives[{index}]");
        }
    }
    let mut draft = FindingDraft::default();

    match fields.get("name") {
        None | Some(Value::Null) => {}
        Some(Value::String(s)) => draft.name = Some(s.clone()),
        Some(_) => issues.push(issue(format!("positives[{index}].name"), "expected a string")),
    }

    let prob_path = || format!("positives[{index}].probability");
    match fields.get("probability") {
        None | Some(Value::Null) => {}
        Some(Value::Number(n)) => {
            if let Some(i) = n.as_i64() {
                draft.probability = Some(i);
            } else if let Some(f) = n.as_f64().filter(|f| f.fract() == 0.0 && f.abs() < 1e15) {
                log::warn!("coercing float probability {f} in positives[{index}]");
                draft.probability = Some(f as i64);
            } else {
                issues.push(issue(prob_path(), format!("expected an integer, got {n}")));
            }
        }
        Some(Value::String(s)) => match s.trim().parse::<i64>() {
            Ok(i) => {
                log::warn!("coercing string probability {s:?} in positives[{index}]");
                draft.probability = Some(i);
            }
            Err(_) => issues.push(issue(prob_path(), format!("expected an integer, got {s:?}"))),
        },
        Some(other) => {
            issues.push(issue(prob_path(), format!("expected an integer, got {other}")))
        }
    }

    match fields.get("level") {
        None | Some(Value::Null) => {}
        Some(Value::String(s)) => draft.level = Some(s.clone()),
        Some(_) => issues.push(issue(format!("positives[{index}].level"), "expected a string")),
    }

    match fields.get("location") {
        None | Some(Value::Null) => {}
        Some(Value::String(s)) if s.is_empty() => {
            log::warn!("dropping empty location in positives[{index}]");
        }
        Some(Value::String(s)) => draft.location = Some(s.clone()),
        Some(_) => {
            issues.push(issue(format!("positives[{index}].location"), "expected a string"))
        }
    }

    draft
}
