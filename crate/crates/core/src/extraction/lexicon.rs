//! Keyword lexicon: the vocabulary that drives rule-based extraction.
//!
//! A lexicon bundles disease names (with synonyms), hedge words with
//! their probability values, severity keywords, location phrases, and
//! negation cues. One ships embedded in the crate; callers can load a
//! replacement from a JSON file with the same shape.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::tokenize;
use crate::report::{normalize_name, ProbabilityScore, SeverityLevel};

/// The lexicon bundled with the crate, also available on disk as
/// `data/default_lexicon.json` for use as a template.
const DEFAULT_LEXICON_JSON: &str = include_str!("../../data/default_lexicon.json");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LexiconError {
    #[error("cannot read lexicon file: {0}")]
    Unreadable(String),
    #[error("lexicon file is not valid JSON: {0}")]
    Malformed(String),
    #[error("disease list is empty")]
    NoDiseases,
    #[error("empty surface form in {list}")]
    EmptySurface { list: &'static str },
    #[error("surface form \"{surface}\" appears twice in {list}")]
    DuplicateSurface { list: &'static str, surface: String },
    #[error("hedge \"{surface}\" maps to {value}, must be 1..=3")]
    BadHedgeValue { surface: String, value: i64 },
    #[error("severity keyword \"{surface}\" maps to unknown level \"{value}\"")]
    BadSeverityValue { surface: String, value: String },
    #[error("hedge_render key \"{0}\" is not a probability score (1..=3)")]
    BadRenderKey(String),
}

/// A keyword phrase stored tokenized, matched against sentence tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Surface {
    pub tokens: Vec<String>,
}

impl Surface {
    fn parse(raw: &str, list: &'static str) -> Result<Self, LexiconError> {
        let tokens = tokenize(raw);
        if tokens.is_empty() {
            return Err(LexiconError::EmptySurface { list });
        }
        Ok(Surface { tokens })
    }

    pub(crate) fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// One disease: the canonical name plus alternative surface spellings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiseaseEntry {
    pub canonical: String,
    pub synonyms: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct KeywordLexicon {
    diseases: Vec<DiseaseEntry>,
    /// Every disease surface (canonical and synonym), tokenized, with
    /// the index of its canonical entry.
    pub(crate) disease_surfaces: Vec<(Surface, usize)>,
    pub(crate) hedges: Vec<(Surface, ProbabilityScore)>,
    pub(crate) severities: Vec<(Surface, SeverityLevel)>,
    pub(crate) locations: Vec<Surface>,
    pub(crate) negation_cues: Vec<Surface>,
}

impl KeywordLexicon {
    /// Builds and checks a lexicon. Surface forms are normalized by
    /// the extraction tokenizer; each list must be duplicate-free and
    /// the disease list non-empty, since an empty vocabulary would
    /// silently extract nothing.
    pub fn from_parts(
        diseases: Vec<DiseaseEntry>,
        hedges: BTreeMap<String, i64>,
        severities: BTreeMap<String, String>,
        locations: Vec<String>,
        negation_cues: Vec<String>,
    ) -> Result<Self, LexiconError> {
        if diseases.is_empty() {
            return Err(LexiconError::NoDiseases);
        }
        let normalized: Vec<DiseaseEntry> = diseases
            .iter()
            .map(|d| DiseaseEntry {
                canonical: normalize_name(&d.canonical),
                synonyms: d.synonyms.iter().map(|s| normalize_name(s)).collect(),
            })
            .collect();

        let mut disease_surfaces = Vec::new();
        let mut seen = HashSet::new();
        for (i, entry) in normalized.iter().enumerate() {
            for raw in std::iter::once(&entry.canonical).chain(&entry.synonyms) {
                let surface = Surface::parse(raw, "diseases")?;
                if !seen.insert(surface.tokens.clone()) {
                    return Err(LexiconError::DuplicateSurface {
                        list: "diseases",
                        surface: surface.text(),
                    });
                }
                disease_surfaces.push((surface, i));
            }
        }

        let mut hedge_surfaces = Vec::new();
        let mut seen = HashSet::new();
        for (raw, value) in &hedges {
            let surface = Surface::parse(raw, "hedges")?;
            let score = ProbabilityScore::new(*value)
                .ok_or(LexiconError::BadHedgeValue { surface: surface.text(), value: *value })?;
            if !seen.insert(surface.tokens.clone()) {
                return Err(LexiconError::DuplicateSurface {
                    list: "hedges",
                    surface: surface.text(),
                });
            }
            hedge_surfaces.push((surface, score));
        }

        let mut severity_surfaces = Vec::new();
        let mut seen = HashSet::new();
        for (raw, value) in &severities {
            let surface = Surface::parse(raw, "severities")?;
            let level = SeverityLevel::from_canonical(value).ok_or_else(|| {
                LexiconError::BadSeverityValue { surface: surface.text(), value: value.clone() }
            })?;
            if !seen.insert(surface.tokens.clone()) {
                return Err(LexiconError::DuplicateSurface {
                    list: "severities",
                    surface: surface.text(),
                });
            }
            severity_surfaces.push((surface, level));
        }

        let mut location_surfaces = Vec::new();
        let mut seen = HashSet::new();
        for raw in &locations {
            let surface = Surface::parse(raw, "locations")?;
            if !seen.insert(surface.tokens.clone()) {
                return Err(LexiconError::DuplicateSurface {
                    list: "locations",
                    surface: surface.text(),
                });
            }
            location_surfaces.push(surface);
        }

        let mut cue_surfaces = Vec::new();
        let mut seen = HashSet::new();
        for raw in &negation_cues {
            let surface = Surface::parse(raw, "negation_cues")?;
            if !seen.insert(surface.tokens.clone()) {
                return Err(LexiconError::DuplicateSurface {
                    list: "negation_cues",
                    surface: surface.text(),
                });
            }
            cue_surfaces.push(surface);
        }

        Ok(KeywordLexicon {
            diseases: normalized,
            disease_surfaces,
            hedges: hedge_surfaces,
            severities: severity_surfaces,
            locations: location_surfaces,
            negation_cues: cue_surfaces,
        })
    }

    /// The lexicon embedded in the crate: 30 chest X-ray disease
    /// types, common hedge/severity vocabulary, and lobe/zone
    /// location phrases.
    pub fn bundled() -> &'static KeywordLexicon {
        static BUNDLED: OnceLock<KeywordLexicon> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            LoadedLexicon::from_json(DEFAULT_LEXICON_JSON)
                .expect("bundled lexicon must parse")
                .lexicon
        })
    }

    pub fn diseases(&self) -> &[DiseaseEntry] {
        &self.diseases
    }

    pub fn canonical_names(&self) -> impl Iterator<Item = &str> {
        self.diseases.iter().map(|d| d.canonical.as_str())
    }

    pub fn canonical_name(&self, entry_index: usize) -> &str {
        &self.diseases[entry_index].canonical
    }

    /// Location phrases as plain text, normalized.
    pub fn location_phrases(&self) -> impl Iterator<Item = String> + '_ {
        self.locations.iter().map(Surface::text)
    }

    /// Hedge phrases with their probability values, normalized.
    pub fn hedge_phrases(&self) -> impl Iterator<Item = (String, ProbabilityScore)> + '_ {
        self.hedges.iter().map(|(s, p)| (s.text(), *p))
    }

    /// Severity keywords with their levels, normalized.
    pub fn severity_phrases(&self) -> impl Iterator<Item = (String, SeverityLevel)> + '_ {
        self.severities.iter().map(|(s, l)| (s.text(), *l))
    }
}

/// Raw file shape for serde; validation happens in
/// [`KeywordLexicon::from_parts`].
#[derive(Deserialize)]
struct LexiconFile {
    diseases: Vec<DiseaseEntryFile>,
    hedges: BTreeMap<String, i64>,
    severities: BTreeMap<String, String>,
    locations: Vec<String>,
    negation_cues: Vec<String>,
    #[serde(default)]
    hedge_render: Option<BTreeMap<String, (String, String)>>,
}

#[derive(Deserialize)]
struct DiseaseEntryFile {
    canonical: String,
    #[serde(default)]
    synonyms: Vec<String>,
}

/// A lexicon together with the optional sentence-template table from
/// the same file and the SHA-256 of the source bytes (echoed into
/// result summaries so runs are attributable to a vocabulary).
#[derive(Debug, Clone)]
pub struct LoadedLexicon {
    pub lexicon: KeywordLexicon,
    /// `hedge_render` key, if the file carries one: probability value
    /// to (hedge word, verb) for sentence rendering.
    pub hedge_render: Option<BTreeMap<u8, (String, String)>>,
    pub sha256: String,
}

impl LoadedLexicon {
    pub fn from_json(json: &str) -> Result<Self, LexiconError> {
        let file: LexiconFile =
            serde_json::from_str(json).map_err(|e| LexiconError::Malformed(e.to_string()))?;
        let lexicon = KeywordLexicon::from_parts(
            file.diseases
                .into_iter()
                .map(|d| DiseaseEntry { canonical: d.canonical, synonyms: d.synonyms })
                .collect(),
            file.hedges,
            file.severities,
            file.locations,
            file.negation_cues,
        )?;
        let hedge_render = match file.hedge_render {
            None => None,
            Some(raw) => {
                let mut table = BTreeMap::new();
                for (key, pair) in raw {
                    let value: u8 = key
                        .parse::<i64>()
                        .ok()
                        .and_then(ProbabilityScore::new)
                        .ok_or_else(|| LexiconError::BadRenderKey(key.clone()))?
                        .value();
                    table.insert(value, pair);
                }
                Some(table)
            }
        };
        Ok(LoadedLexicon { lexicon, hedge_render, sha256: sha256_hex(json.as_bytes()) })
    }

    pub fn from_path(path: &Path) -> Result<Self, LexiconError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| LexiconError::Unreadable(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    /// The embedded default, hashed like any other source.
    pub fn bundled() -> Self {
        Self::from_json(DEFAULT_LEXICON_JSON).expect("bundled lexicon must parse")
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}
