//! Core data model for structured radiology reports.
//!
//! A [`StructuredReport`] lists positive findings (disease present or
//! suspected, with optional detail attributes) and negative findings
//! (disease explicitly ruled out, name only). Absent attributes are
//! represented with `Option`/[`SeverityLevel::Unspecified`], never with
//! sentinel strings.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Certainty that a finding is present: 1 = possible, 2 = probable,
/// 3 = definite. Higher means more certain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProbabilityScore(u8);

impl ProbabilityScore {
    pub const POSSIBLE: ProbabilityScore = ProbabilityScore(1);
    pub const PROBABLE: ProbabilityScore = ProbabilityScore(2);
    pub const DEFINITE: ProbabilityScore = ProbabilityScore(3);

    /// Accepts 1, 2, or 3.
    pub fn new(value: i64) -> Option<Self> {
        match value {
            1..=3 => Some(ProbabilityScore(value as u8)),
            _ => None,
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Affine map onto [0, 1]: 1 -> 0.0, 2 -> 0.5, 3 -> 1.0. Scoring
    /// compares probabilities on this scale so the squared gap between
    /// the extremes is exactly 1.
    pub fn unit_interval(self) -> f64 {
        f64::from(self.0 - 1) / 2.0
    }
}

impl fmt::Display for ProbabilityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Severity grade of a positive finding. `Unspecified` is the absence
/// marker: reports that do not grade a finding carry it explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum SeverityLevel {
    #[default]
    Unspecified,
    Mild,
    Moderate,
    Severe,
}

impl SeverityLevel {
    pub fn from_canonical(s: &str) -> Option<Self> {
        match s {
            "unspecified" => Some(SeverityLevel::Unspecified),
            "mild" => Some(SeverityLevel::Mild),
            "moderate" => Some(SeverityLevel::Moderate),
            "severe" => Some(SeverityLevel::Severe),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeverityLevel::Unspecified => "unspecified",
            SeverityLevel::Mild => "mild",
            SeverityLevel::Moderate => "moderate",
            SeverityLevel::Severe => "severe",
        }
    }

    pub fn is_graded(self) -> bool {
        self != SeverityLevel::Unspecified
    }
}

impl fmt::Display for SeverityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One positive finding. `probability`/`location` are `None` and
/// `level` is `Unspecified` when the source did not state them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositiveFinding {
    pub name: String,
    pub probability: Option<ProbabilityScore>,
    pub level: SeverityLevel,
    pub location: Option<String>,
}

impl PositiveFinding {
    /// Finding with just a name; attributes start absent.
    pub fn named(name: impl Into<String>) -> Self {
        PositiveFinding {
            name: name.into(),
            probability: None,
            level: SeverityLevel::Unspecified,
            location: None,
        }
    }
}

/// A full structured report: positive findings plus ruled-out disease
/// names. Plain data; [`validate`] is the integrity gate.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StructuredReport {
    pub positives: Vec<PositiveFinding>,
    pub negatives: Vec<String>,
}

impl StructuredReport {
    pub fn new(positives: Vec<PositiveFinding>, negatives: Vec<String>) -> Self {
        StructuredReport { positives, negatives }
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty() && self.negatives.is_empty()
    }
}

/// Loosely-typed report as it comes off the wire, before enum and
/// integrity checks. [`validate`] operates on this shape so that it can
/// describe violations (probability 5, level "huge", a finding with no
/// name at all) that the typed report cannot even represent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportDraft {
    pub positives: Vec<FindingDraft>,
    pub negatives: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FindingDraft {
    pub name: Option<String>,
    pub probability: Option<i64>,
    pub level: Option<String>,
    pub location: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IssueKind {
    MissingField,
    BadEnum,
    DuplicateName,
    EmptyName,
    CrossListConflict,
}

impl IssueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueKind::MissingField => "missing-field",
            IssueKind::BadEnum => "bad-enum",
            IssueKind::DuplicateName => "duplicate-name",
            IssueKind::EmptyName => "empty-name",
            IssueKind::CrossListConflict => "cross-list-conflict",
        }
    }
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One schema violation, located by a JSON-path-like string such as
/// `positives[2].probability`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationIssue {
    pub path: String,
    pub kind: IssueKind,
    pub message: String,
}

impl ValidationIssue {
    fn new(path: String, kind: IssueKind, message: impl Into<String>) -> Self {
        ValidationIssue { path, kind, message: message.into() }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.kind, self.path, self.message)
    }
}

/// Report rejected by validation; carries every violation found, not
/// just the first.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct InvalidReport {
    pub issues: Vec<ValidationIssue>,
}

impl fmt::Display for InvalidReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid report ({} issue(s)): ", self.issues.len())?;
        let mut first = true;
        for issue in &self.issues {
            if !first {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
            first = false;
        }
        Ok(())
    }
}

/// Canonical spelling of a disease name: lowercased, inner whitespace
/// collapsed to single spaces, leading/trailing punctuation and
/// whitespace stripped. Idempotent, and never longer (in code points)
/// than its input.
pub fn normalize_name(raw: &str) -> String {
    let mut lowered = String::with_capacity(raw.len());
    for c in raw.chars() {
        // Take only the first char of a multi-char lowercase expansion
        // (U+0130 and friends) so the output cannot outgrow the input.
        if let Some(first) = c.to_lowercase().next() {
            lowered.push(first);
        }
    }
    let trimmed = lowered.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    let mut out = String::with_capacity(trimmed.len());
    for (i, word) in trimmed.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

const CANONICAL_LEVELS: [&str; 4] = ["unspecified", "mild", "moderate", "severe"];

/// Checks a draft against the schema and returns every violation.
/// Empty result means the draft converts cleanly to a
/// [`StructuredReport`]. Name comparisons go through
/// [`normalize_name`], so `"Edema"` and `"edema "` collide.
pub fn validate(draft: &ReportDraft) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    let mut seen_pos: HashSet<String> = HashSet::new();

    for (i, finding) in draft.positives.iter().enumerate() {
        let base = format!("positives[{i}]");
        match &finding.name {
            None => issues.push(ValidationIssue::new(
                format!("{base}.name"),
                IssueKind::MissingField,
                "finding has no name",
            )),
            Some(raw) => {
                let name = normalize_name(raw);
                if name.is_empty() {
                    issues.push(ValidationIssue::new(
                        format!("{base}.name"),
                        IssueKind::EmptyName,
                        "name is empty after normalization",
                    ));
                } else if !seen_pos.insert(name.clone()) {
                    issues.push(ValidationIssue::new(
                        format!("{base}.name"),
                        IssueKind::DuplicateName,
                        format!("\"{name}\" appears more than once in positives"),
                    ));
                }
            }
        }
        if let Some(p) = finding.probability {
            if ProbabilityScore::new(p).is_none() {
                issues.push(ValidationIssue::new(
                    format!("{base}.probability"),
                    IssueKind::BadEnum,
                    format!("probability must be 1, 2, or 3, got {p}"),
                ));
            }
        }
        if let Some(level) = &finding.level {
            if SeverityLevel::from_canonical(level).is_none() {
                issues.push(ValidationIssue::new(
                    format!("{base}.level"),
                    IssueKind::BadEnum,
                    format!(
                        "level must be one of {}, got \"{level}\"",
                        CANONICAL_LEVELS.join("/")
                    ),
                ));
            }
        }
        if let Some(loc) = &finding.location {
            if loc.trim().is_empty() {
                issues.push(ValidationIssue::new(
                    format!("{base}.location"),
                    IssueKind::BadEnum,
                    "location, when present, must be a non-empty phrase",
                ));
            }
        }
    }

    let mut seen_neg: HashSet<String> = HashSet::new();
    for (i, raw) in draft.negatives.iter().enumerate() {
        let path = format!("negatives[{i}]");
        let name = normalize_name(raw);
        if name.is_empty() {
            issues.push(ValidationIssue::new(
                path,
                IssueKind::EmptyName,
                "name is empty after normalization",
            ));
        } else if !seen_neg.insert(name.clone()) {
            issues.push(ValidationIssue::new(
                path,
                IssueKind::DuplicateName,
                format!("\"{name}\" appears more than once in negatives"),
            ));
        } else if seen_pos.contains(&name) {
            issues.push(ValidationIssue::new(
                path,
                IssueKind::CrossListConflict,
                format!("\"{name}\" is listed both positive and negative"),
            ));
        }
    }

    issues
}

impl StructuredReport {
    /// Typed report from a clean draft. Fails with the full issue list
    /// otherwise. Names are kept as written; use [`canonical_form`] to
    /// normalize them.
    pub fn from_draft(draft: &ReportDraft) -> Result<Self, InvalidReport> {
        let issues = validate(draft);
        if !issues.is_empty() {
            return Err(InvalidReport { issues });
        }
        let positives = draft
            .positives
            .iter()
            .map(|f| PositiveFinding {
                name: f.name.clone().unwrap_or_default(),
                probability: f.probability.and_then(ProbabilityScore::new),
                level: f
                    .level
                    .as_deref()
                    .and_then(SeverityLevel::from_canonical)
                    .unwrap_or_default(),
                location: f.location.clone(),
            })
            .collect();
        Ok(StructuredReport { positives, negatives: draft.negatives.clone() })
    }

    pub fn to_draft(&self) -> ReportDraft {
        ReportDraft {
            positives: self
                .positives
                .iter()
                .map(|f| FindingDraft {
                    name: Some(f.name.clone()),
                    probability: f.probability.map(|p| i64::from(p.value())),
                    level: f.level.is_graded().then(|| f.level.as_str().to_string()),
                    location: f.location.clone(),
                })
                .collect(),
            negatives: self.negatives.clone(),
        }
    }
}

/// The unique canonical representative of a report: names normalized,
/// both lists sorted by name. Idempotent. Rejects reports that do not
/// validate, so downstream comparisons never see duplicates.
pub fn canonical_form(report: &StructuredReport) -> Result<StructuredReport, InvalidReport> {
    let issues = validate(&report.to_draft());
    if !issues.is_empty() {
        return Err(InvalidReport { issues });
    }
    let mut positives: Vec<PositiveFinding> = report
        .positives
        .iter()
        .map(|f| PositiveFinding { name: normalize_name(&f.name), ..f.clone() })
        .collect();
    positives.sort_by(|a, b| a.name.cmp(&b.name));
    let mut negatives: Vec<String> =
        report.negatives.iter().map(|n| normalize_name(n)).collect();
    negatives.sort();
    Ok(StructuredReport { positives, negatives })
}
