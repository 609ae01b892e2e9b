//! Rule-based extraction of structured reports from free-text
//! findings.
//!
//! The pipeline: [`segment_sentences`] -> [`tokenize`] ->
//! [`find_disease_mentions`] (longest-match against the lexicon) ->
//! per-mention attributes ([`detect_negation`], [`extract_probability`],
//! [`extract_severity`], [`extract_location`]) -> merge into a
//! [`StructuredReport`]. Everything is deterministic: the same text
//! and lexicon always produce the same report.
//!
//! Attribute attachment is nearest-keyword within the sentence.
//! "Nearest" means the smallest token gap between the keyword match
//! and the mention span; on a tie the keyword preceding the mention
//! wins.

mod lexicon;
mod rewrite;

pub use lexicon::{DiseaseEntry, KeywordLexicon, LexiconError, LoadedLexicon};
pub use rewrite::{
    rephrase_location, IdentityRewriter, LocationRewriter, RewriteError, RuleRewriter,
};

use std::collections::HashMap;
use std::ops::Range;

use lexicon::Surface;

use crate::report::{PositiveFinding, ProbabilityScore, SeverityLevel, StructuredReport};

/// Words whose trailing period does not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "dr.", "mr.", "mrs.", "ms.", "a.m.", "p.m.", "e.g.", "i.e.", "etc.", "vs.", "cf.", "no.",
    "fig.", "st.", "approx.",
];

/// Tokens that stop a negation cue from reaching a later mention.
const SCOPE_BREAKERS: &[&str] = &[",", ";", "but", "however", "although"];

/// How far (in tokens) a severity keyword may sit from the mention it
/// grades.
pub const DEFAULT_SEVERITY_WINDOW: usize = 5;

/// Splits text into sentences at `.`/`!`/`?` followed by whitespace or
/// end of input, except after known abbreviations ("3.5 cm" and
/// "a.m." stay intact). Sentences keep their final delimiter and have
/// their whitespace collapsed, so joining them with single spaces
/// reconstructs the input modulo whitespace.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    for i in 0..chars.len() {
        let c = chars[i];
        if c != '.' && c != '!' && c != '?' {
            continue;
        }
        let at_boundary = i + 1 == chars.len() || chars[i + 1].is_whitespace();
        if !at_boundary {
            continue; // mid-token punctuation such as a decimal point
        }
        if c == '.' && ends_with_abbreviation(&chars[..=i]) {
            continue;
        }
        push_collapsed(&mut sentences, &chars[start..=i]);
        start = i + 1;
    }
    push_collapsed(&mut sentences, &chars[start..]);
    sentences
}

fn push_collapsed(sentences: &mut Vec<String>, chars: &[char]) {
    let raw: String = chars.iter().collect();
    let mut collapsed = String::with_capacity(raw.len());
    for (i, word) in raw.split_whitespace().enumerate() {
        if i > 0 {
            collapsed.push(' ');
        }
        collapsed.push_str(word);
    }
    if !collapsed.is_empty() {
        sentences.push(collapsed);
    }
}

fn ends_with_abbreviation(chars: &[char]) -> bool {
    let word_start = chars
        .iter()
        .rposition(|c| c.is_whitespace())
        .map_or(0, |i| i + 1);
    let word: String = chars[word_start..].iter().collect::<String>().to_lowercase();
    let word = word.trim_start_matches(|c: char| c.is_ascii_punctuation() && c != '.');
    ABBREVIATIONS.contains(&word)
}

/// Lowercases and splits a sentence into word and punctuation tokens.
/// Punctuation becomes its own token except for hyphens joining two
/// alphanumeric characters: `"Mild, left-sided edema."` yields
/// `["mild", ",", "left-sided", "edema", "."]`. Tokenizing the
/// space-joined token list reproduces the tokens.
pub fn tokenize(sentence: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in sentence.split_whitespace() {
        let chars: Vec<char> = chunk.to_lowercase().chars().collect();
        let mut i = 0;
        while i < chars.len() {
            if chars[i].is_alphanumeric() {
                let mut j = i + 1;
                while j < chars.len() {
                    if chars[j].is_alphanumeric() {
                        j += 1;
                    } else if chars[j] == '-'
                        && j + 1 < chars.len()
                        && chars[j + 1].is_alphanumeric()
                    {
                        j += 2;
                    } else {
                        break;
                    }
                }
                tokens.push(chars[i..j].iter().collect());
                i = j;
            } else {
                tokens.push(chars[i].to_string());
                i += 1;
            }
        }
    }
    tokens
}

fn matches_at(tokens: &[String], pos: usize, surface: &Surface) -> bool {
    pos + surface.tokens.len() <= tokens.len()
        && surface.tokens.iter().zip(&tokens[pos..]).all(|(a, b)| a == b)
}

/// Left-to-right, non-overlapping, longest-match scan. Returns
/// `(index into surfaces, token range)` per hit.
fn scan_surfaces<'s>(
    tokens: &[String],
    surfaces: impl Iterator<Item = &'s Surface> + Clone,
) -> Vec<(usize, Range<usize>)> {
    let mut hits = Vec::new();
    let mut pos = 0;
    while pos < tokens.len() {
        let mut best: Option<(usize, usize)> = None;
        for (idx, surface) in surfaces.clone().enumerate() {
            if matches_at(tokens, pos, surface)
                && best.map_or(true, |(_, len)| surface.tokens.len() > len)
            {
                best = Some((idx, surface.tokens.len()));
            }
        }
        match best {
            Some((idx, len)) => {
                hits.push((idx, pos..pos + len));
                pos += len;
            }
            None => pos += 1,
        }
    }
    hits
}

/// Disease mentions in one tokenized sentence as `(canonical name,
/// token span)`. Longest surface form wins at each position
/// ("pleural effusion" beats its substring "effusion"), matches never
/// overlap, and the same disease may be mentioned more than once.
pub fn find_disease_mentions(
    tokens: &[String],
    lexicon: &KeywordLexicon,
) -> Vec<(String, Range<usize>)> {
    scan_surfaces(tokens, lexicon.disease_surfaces.iter().map(|(s, _)| s))
        .into_iter()
        .map(|(idx, range)| {
            let (_, entry) = &lexicon.disease_surfaces[idx];
            (lexicon.canonical_name(*entry).to_string(), range)
        })
        .collect()
}

/// Token gap between two non-overlapping spans (0 when adjacent or
/// overlapping).
fn gap(a: &Range<usize>, b: &Range<usize>) -> usize {
    if a.end <= b.start {
        b.start - a.end
    } else if b.end <= a.start {
        a.start - b.end
    } else {
        0
    }
}

/// Nearest hit to `span`, ties preferring a hit that precedes it.
/// `hits` must be in left-to-right order.
fn nearest_hit<V: Copy>(
    hits: &[(V, Range<usize>)],
    span: &Range<usize>,
    window: Option<usize>,
) -> Option<V> {
    let mut best: Option<(V, usize, bool)> = None;
    for (value, range) in hits {
        let distance = gap(range, span);
        if window.is_some_and(|w| distance > w) {
            continue;
        }
        let precedes = range.end <= span.start;
        let better = match &best {
            None => true,
            Some((_, best_distance, best_precedes)) => {
                distance < *best_distance
                    || (distance == *best_distance && precedes && !best_precedes)
            }
        };
        if better {
            best = Some((*value, distance, precedes));
        }
    }
    best.map(|(value, _, _)| value)
}

/// True when a negation cue precedes the mention in the same sentence
/// with no scope breaker (comma, semicolon, "but", "however",
/// "although") between cue and mention.
pub fn detect_negation(tokens: &[String], span: Range<usize>, lexicon: &KeywordLexicon) -> bool {
    for (_, cue) in scan_surfaces(tokens, lexicon.negation_cues.iter()) {
        if cue.end > span.start {
            continue;
        }
        let blocked = tokens[cue.end..span.start]
            .iter()
            .any(|t| SCOPE_BREAKERS.contains(&t.as_str()));
        if !blocked {
            return true;
        }
    }
    false
}

/// Probability from the nearest hedge in the sentence; an unhedged
/// mention is definite (3).
pub fn extract_probability(
    tokens: &[String],
    span: Range<usize>,
    lexicon: &KeywordLexicon,
) -> ProbabilityScore {
    let hits: Vec<(ProbabilityScore, Range<usize>)> =
        scan_surfaces(tokens, lexicon.hedges.iter().map(|(s, _)| s))
            .into_iter()
            .map(|(idx, range)| (lexicon.hedges[idx].1, range))
            .collect();
    nearest_hit(&hits, &span, None).unwrap_or(ProbabilityScore::DEFINITE)
}

/// Severity from the nearest keyword within `window` tokens of the
/// span; none in range leaves the level unspecified.
pub fn extract_severity_with_window(
    tokens: &[String],
    span: Range<usize>,
    lexicon: &KeywordLexicon,
    window: usize,
) -> SeverityLevel {
    let hits: Vec<(SeverityLevel, Range<usize>)> =
        scan_surfaces(tokens, lexicon.severities.iter().map(|(s, _)| s))
            .into_iter()
            .map(|(idx, range)| (lexicon.severities[idx].1, range))
            .collect();
    nearest_hit(&hits, &span, Some(window)).unwrap_or_default()
}

/// [`extract_severity_with_window`] at the default window of
/// [`DEFAULT_SEVERITY_WINDOW`] tokens.
pub fn extract_severity(
    tokens: &[String],
    span: Range<usize>,
    lexicon: &KeywordLexicon,
) -> SeverityLevel {
    extract_severity_with_window(tokens, span, lexicon, DEFAULT_SEVERITY_WINDOW)
}

/// Location phrase for the mention at `span`, as written in the text
/// (not yet rephrased). Every location phrase in the sentence
/// attaches to exactly one mention — its nearest — so two findings
/// never share one phrase; a mention offered several phrases keeps
/// the nearest.
pub fn extract_location(
    tokens: &[String],
    span: Range<usize>,
    lexicon: &KeywordLexicon,
) -> Option<String> {
    let mention_spans: Vec<(usize, Range<usize>)> = find_disease_mentions(tokens, lexicon)
        .into_iter()
        .enumerate()
        .map(|(i, (_, mention_span))| (i, mention_span))
        .collect();

    let mine: Vec<(usize, Range<usize>)> = scan_surfaces(tokens, lexicon.locations.iter())
        .into_iter()
        .enumerate()
        .filter(|(_, (_, phrase_range))| {
            let owner = nearest_hit(&mention_spans, phrase_range, None);
            owner.is_some_and(|i| mention_spans[i].1 == span)
        })
        .map(|(i, (_, phrase_range))| (i, phrase_range))
        .collect();

    let winner = nearest_hit(&mine, &span, None)?;
    let (_, range) = mine.into_iter().find(|(i, _)| *i == winner).expect("winner came from mine");
    Some(tokens[range].join(" "))
}

/// One disease mention with everything the sentence says about it.
/// `location` is the phrase as matched in the text; rephrasing happens
/// when mentions are merged into a report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub name: String,
    pub sentence_index: usize,
    pub token_span: Range<usize>,
    pub negated: bool,
    pub probability: ProbabilityScore,
    pub level: SeverityLevel,
    pub location: Option<String>,
}

/// Runs the per-sentence pipeline over whole text and returns every
/// mention in reading order.
pub fn scan_mentions(text: &str, lexicon: &KeywordLexicon) -> Vec<Mention> {
    let mut mentions = Vec::new();
    for (sentence_index, sentence) in segment_sentences(text).iter().enumerate() {
        let tokens = tokenize(sentence);
        for (name, span) in find_disease_mentions(&tokens, lexicon) {
            mentions.push(Mention {
                negated: detect_negation(&tokens, span.clone(), lexicon),
                probability: extract_probability(&tokens, span.clone(), lexicon),
                level: extract_severity(&tokens, span.clone(), lexicon),
                location: extract_location(&tokens, span.clone(), lexicon),
                name,
                sentence_index,
                token_span: span,
            });
        }
    }
    mentions
}

/// Extracts a validated structured report from free text.
///
/// Mentions of the same disease merge: one asserted mention makes the
/// disease positive (assertion beats negation), the merged attributes
/// take the maximum probability, the first graded severity, and the
/// first present location (rephrased through `rewriter`) across the
/// asserted mentions in reading order. Diseases only ever negated
/// become name-only negatives. Findings appear in first-mention
/// order; every disease name comes from the lexicon.
pub fn extract_report(
    text: &str,
    lexicon: &KeywordLexicon,
    rewriter: &dyn LocationRewriter,
) -> StructuredReport {
    let mentions = scan_mentions(text, lexicon);
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&Mention>> = HashMap::new();
    for mention in &mentions {
        let slot = groups.entry(mention.name.as_str()).or_default();
        if slot.is_empty() {
            order.push(&mention.name);
        }
        slot.push(mention);
    }

    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for name in order {
        let group = &groups[name];
        let asserted: Vec<&Mention> = group.iter().copied().filter(|m| !m.negated).collect();
        if asserted.is_empty() {
            negatives.push(name.to_string());
            continue;
        }
        let probability = asserted.iter().map(|m| m.probability).max();
        let level = asserted
            .iter()
            .map(|m| m.level)
            .find(|l| l.is_graded())
            .unwrap_or_default();
        let location = asserted
            .iter()
            .find_map(|m| m.location.as_deref())
            .map(|phrase| rephrase_location(phrase, rewriter));
        positives.push(PositiveFinding { name: name.to_string(), probability, level, location });
    }
    StructuredReport::new(positives, negatives)
}
