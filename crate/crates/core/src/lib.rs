//! Evaluation toolkit for structured radiology reports.
//!
//! The pipeline this crate supports end to end:
//!
//! 1. **Parse** model output into a [`report::StructuredReport`]
//!    ([`codec`]), repairing almost-JSON when asked to.
//! 2. **Extract** structured reports from free-text findings with a
//!    keyword lexicon ([`extraction`]).
//! 3. **Score** a hypothesis report against a reference with the
//!    S-Score family ([`score`]): set overlap of disease names plus
//!    gated detail scores for probability, severity, and location.
//! 4. **Render** structured reports back to templated sentences
//!    ([`render`]) so text-level metrics ([`nlg`]) stay comparable.
//! 5. **Validate** metric rankings against human ratings with rank
//!    correlation ([`correlation`]).
//!
//! [`corpus`] holds the line-delimited corpus formats shared by the
//! command-line tools.

pub mod codec;
pub mod correlation;
pub mod corpus;
pub mod extraction;
pub mod nlg;
pub mod render;
pub mod report;
pub mod score;

pub use extraction::{KeywordLexicon, LocationRewriter};
pub use report::{
    canonical_form, normalize_name, validate, PositiveFinding, ProbabilityScore, ReportDraft,
    SeverityLevel, StructuredReport, ValidationIssue,
};
pub use score::{s_score, DetailWeights, ScoreBreakdown};
