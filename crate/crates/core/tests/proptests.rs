//! Property-based invariants across the library modules: randomized
//! inputs check the guarantees each public function documents, from
//! name normalization through repair, extraction, scoring, rendering,
//! and rank correlation.

use std::collections::{BTreeSet, HashSet};

use proptest::prelude::*;

use sreval::codec::{parse_strict, repair, serialize};
use sreval::corpus::corpus_stats;
use sreval::correlation::{kendall_tau_b, spearman};
use sreval::extraction::{
    extract_report, segment_sentences, tokenize, KeywordLexicon, RuleRewriter,
};
use sreval::nlg::{bleu, meteor_lite, rouge_l, BleuConfig, Smoothing};
use sreval::render::{render_report, HedgeTable};
use sreval::report::{
    canonical_form, normalize_name, validate, PositiveFinding, ProbabilityScore, SeverityLevel,
    StructuredReport,
};
use sreval::score::{d_score, p_score, ScoreConfig};

const NAME_POOL: &[&str] = &[
    "edema",
    "pneumonia",
    "pneumothorax",
    "pleural effusion",
    "atelectasis",
    "consolidation",
    "cardiomegaly",
    "fracture",
    "nodule",
    "opacity",
    "emphysema",
    "fibrosis",
];

const PLACE_POOL: &[&str] = &[
    "in the left lower lobe",
    "in the right upper lobe",
    "at the left base",
    "in the right middle lobe",
    "near the hilum",
    "at the costophrenic angle",
];

fn level_from(code: u8) -> SeverityLevel {
    match code % 4 {
        0 => SeverityLevel::Unspecified,
        1 => SeverityLevel::Mild,
        2 => SeverityLevel::Moderate,
        _ => SeverityLevel::Severe,
    }
}

/// Cosmetic variants that normalization must undo.
fn decorate(name: &str, seed: u8) -> String {
    match seed % 3 {
        0 => name.to_string(),
        1 => name.to_uppercase(),
        _ => format!("  {name}\t"),
    }
}

prop_compose! {
    /// A structurally valid report: distinct pool names split between
    /// the positive and negative lists, every optional detail drawn
    /// independently, names sometimes decorated with case or padding.
    fn valid_report()(
        names in prop::sample::subsequence(NAME_POOL.to_vec(), 0..=7),
        split in any::<prop::sample::Index>(),
        decorations in prop::collection::vec(0u8..3, 7),
        details in prop::collection::vec(
            (
                prop::option::of(1i64..=3),
                0u8..4,
                prop::option::of(prop::sample::select(PLACE_POOL.to_vec())),
            ),
            7,
        ),
    ) -> StructuredReport {
        let cut = split.index(names.len() + 1);
        let positives = names[..cut]
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let (probability, level_code, location) = &details[i];
                PositiveFinding {
                    name: decorate(name, decorations[i]),
                    probability: probability.and_then(ProbabilityScore::new),
                    level: level_from(*level_code),
                    location: location.map(str::to_string),
                }
            })
            .collect();
        let negatives = names[cut..].iter().map(|s| s.to_string()).collect();
        StructuredReport::new(positives, negatives)
    }
}

prop_compose! {
    /// A report whose rendering is unambiguous: probability always
    /// present (absent probability renders like definite), locations
    /// absent or a non-empty pool phrase, names undecorated.
    fn renderable_report()(
        names in prop::sample::subsequence(NAME_POOL.to_vec(), 0..=5),
        split in any::<prop::sample::Index>(),
        details in prop::collection::vec(
            (
                1i64..=3,
                0u8..4,
                prop::option::of(prop::sample::select(PLACE_POOL.to_vec())),
            ),
            5,
        ),
    ) -> StructuredReport {
        let cut = split.index(names.len() + 1);
        let positives = names[..cut]
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let (probability, level_code, location) = &details[i];
                PositiveFinding {
                    name: name.to_string(),
                    probability: ProbabilityScore::new(*probability),
                    level: level_from(*level_code),
                    location: location.map(str::to_string),
                }
            })
            .collect();
        let negatives = names[cut..].iter().map(|s| s.to_string()).collect();
        StructuredReport::new(positives, negatives)
    }
}

/// Inputs for the repair pipeline: arbitrary junk, printable soup,
/// JSON-flavored soup, truncated serializations, fenced and
/// single-quoted model output.
fn repair_input() -> impl Strategy<Value = String> {
    prop_oneof![
        2 => any::<String>(),
        2 => "[ -~]{0,80}",
        3 => proptest::string::string_regex("[{}\\[\\]\"':,a-z0-9 .\\n]{0,60}").unwrap(),
        2 => (valid_report(), any::<prop::sample::Index>()).prop_map(|(report, index)| {
            let text = serialize(&report).expect("pool reports serialize");
            let cut = index.index(text.len() + 1);
            text[..cut].to_string()
        }),
        1 => valid_report().prop_map(|report| {
            format!(
                "Sure! Here is the report:\n```json\n{}\n```\nLet me know.",
                serialize(&report).expect("pool reports serialize"),
            )
        }),
        1 => valid_report().prop_map(|report| {
            serialize(&report).expect("pool reports serialize").replace('"', "'")
        }),
    ]
}

/// Radiology-flavored text plus raw junk, to exercise extraction.
fn medical_text() -> impl Strategy<Value = String> {
    let fragment = prop::sample::select(vec![
        "there is",
        "no evidence of",
        "no",
        "without",
        "may",
        "might",
        "possible",
        "likely",
        "suspected",
        "cannot exclude",
        "mild",
        "moderate",
        "severe",
        "trace",
        "extensive",
        "edema",
        "pleural effusion",
        "pneumonia",
        "pneumothorax",
        "atelectasis",
        "consolidation",
        "nodule",
        "mass",
        "cardiomegaly",
        "in the left lower lobe",
        "in the right upper lobe",
        "at the left base",
        "bilateral",
        "retrocardiac",
        "seen",
        "noted",
        "unchanged",
        "stable",
        "compared with prior",
        ",",
        ".",
        "and",
        "but",
        "however",
        "although",
        "the lungs are clear",
        "heart size is normal",
        "approx",
        "dr smith",
    ]);
    prop_oneof![
        4 => prop::collection::vec(fragment, 0..25).prop_map(|words| words.join(" ")),
        1 => any::<String>(),
        1 => "[ -~]{0,120}",
    ]
}

/// Two same-length vectors with no repeated value on either side.
fn tie_free_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..=20).prop_flat_map(|n| {
        let side = move || {
            prop::collection::btree_set(-10_000i32..10_000, n)
                .prop_map(|values| values.into_iter().map(f64::from).collect::<Vec<f64>>())
                .prop_shuffle()
        };
        (side(), side())
    })
}

/// Canonical disease names from the bundled lexicon, normalized.
fn bundled_disease_names() -> BTreeSet<String> {
    let value: serde_json::Value =
        serde_json::from_str(include_str!("../data/default_lexicon.json")).unwrap();
    value["diseases"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| normalize_name(d["canonical"].as_str().unwrap()))
        .collect()
}

proptest! {
    #[test]
    fn normalize_name_is_idempotent_and_never_lengthens(raw in any::<String>()) {
        let once = normalize_name(&raw);
        prop_assert_eq!(&normalize_name(&once), &once);
        prop_assert!(once.chars().count() <= raw.chars().count());
    }

    #[test]
    fn canonical_form_is_idempotent_and_validates(report in valid_report()) {
        let once = canonical_form(&report).expect("pool reports are valid");
        let twice = canonical_form(&once).expect("canonical reports stay valid");
        prop_assert_eq!(&twice, &once);
        prop_assert!(validate(&once.to_draft()).is_empty());
    }

    #[test]
    fn serialized_reports_parse_back_to_canonical_form(report in valid_report()) {
        let text = serialize(&report).expect("pool reports serialize");
        let parsed = parse_strict(&text).expect("serialized reports parse");
        prop_assert_eq!(parsed, canonical_form(&report).unwrap());
    }

    #[test]
    fn repair_is_idempotent(input in repair_input()) {
        let (once, _) = repair(&input);
        let (twice, second_log) = repair(&once);
        prop_assert_eq!(&twice, &once, "second pass changed the text");
        prop_assert!(
            second_log.is_clean(),
            "second pass applied {:?}",
            second_log.applied
        );
    }

    #[test]
    fn repair_leaves_valid_json_untouched(report in valid_report(), pretty in any::<bool>()) {
        let compact = serialize(&report).expect("pool reports serialize");
        let text = if pretty {
            let value: serde_json::Value = serde_json::from_str(&compact).unwrap();
            serde_json::to_string_pretty(&value).unwrap()
        } else {
            compact
        };
        let (out, log) = repair(&text);
        prop_assert_eq!(out, text);
        prop_assert!(log.is_clean(), "clean input logged {:?}", log.applied);
    }

    #[test]
    fn segmentation_joins_back_to_collapsed_text(text in any::<String>()) {
        let joined = segment_sentences(&text).join(" ");
        let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
        prop_assert_eq!(joined, collapsed);
    }

    #[test]
    fn tokenization_is_stable_under_rejoining(text in any::<String>()) {
        let tokens = tokenize(&text);
        prop_assert_eq!(&tokenize(&tokens.join(" ")), &tokens);
    }

    #[test]
    fn ngram_metrics_stay_bounded_and_ignore_token_identity(
        reference in prop::collection::vec(0u32..8, 1..=14),
        hypothesis in prop::collection::vec(0u32..8, 0..=14),
    ) {
        let cfg = BleuConfig::default();
        let b = bleu(&reference, &hypothesis, cfg).unwrap();
        let r = rouge_l(&reference, &hypothesis);
        let m = meteor_lite(&reference, &hypothesis);
        for (label, value) in [("bleu", b), ("rouge_l", r), ("meteor_lite", m)] {
            prop_assert!((0.0..=1.0).contains(&value), "{} = {} out of bounds", label, value);
        }

        // Renaming tokens through any injective map changes nothing.
        let renamed_ref: Vec<u32> = reference.iter().map(|t| t * 7 + 1000).collect();
        let renamed_hyp: Vec<u32> = hypothesis.iter().map(|t| t * 7 + 1000).collect();
        prop_assert_eq!(bleu(&renamed_ref, &renamed_hyp, cfg).unwrap().to_bits(), b.to_bits());
        prop_assert_eq!(rouge_l(&renamed_ref, &renamed_hyp).to_bits(), r.to_bits());
        prop_assert_eq!(meteor_lite(&renamed_ref, &renamed_hyp).to_bits(), m.to_bits());

        // A sequence compared against itself is a perfect match.
        prop_assert_eq!(bleu(&reference, &reference, cfg).unwrap(), 1.0);
        prop_assert_eq!(rouge_l(&reference, &reference), 1.0);
    }

    #[test]
    fn unsmoothed_bleu_zeroes_exactly_when_an_order_has_no_overlap(
        reference in prop::collection::vec(0u32..4, 1..=10),
        hypothesis in prop::collection::vec(0u32..4, 1..=10),
    ) {
        let cfg = BleuConfig { smoothing: Smoothing::None, ..BleuConfig::default() };
        let effective = 4usize.min(reference.len()).min(hypothesis.len()).max(1);
        let some_order_empty = (1..=effective).any(|n| {
            let seen: HashSet<&[u32]> = reference.windows(n).collect();
            !hypothesis.windows(n).any(|w| seen.contains(w))
        });
        let score = bleu(&reference, &hypothesis, cfg).unwrap();
        prop_assert_eq!(some_order_empty, score == 0.0, "score = {}", score);
    }

    #[test]
    fn presence_score_is_symmetric(a in valid_report(), b in valid_report()) {
        let ab = p_score(&a, &b);
        let ba = p_score(&b, &a);
        prop_assert_eq!(ab.2.to_bits(), ba.2.to_bits());
        prop_assert_eq!(ab.0.to_bits(), ba.0.to_bits());
        prop_assert_eq!(ab.1.to_bits(), ba.1.to_bits());
    }

    #[test]
    fn adding_an_exactly_matching_finding_never_lowers_scores(
        reference in valid_report(),
        hypothesis in valid_report(),
    ) {
        let hyp_positive_names: BTreeSet<String> =
            hypothesis.positives.iter().map(|f| normalize_name(&f.name)).collect();
        let candidate = reference.positives.iter().find(|f| {
            let name = normalize_name(&f.name);
            !hyp_positive_names.contains(&name)
                && !hypothesis.negatives.iter().any(|n| normalize_name(n) == name)
        });
        prop_assume!(candidate.is_some());

        let mut grown = hypothesis.clone();
        grown.positives.push(candidate.unwrap().clone());

        let cfg = ScoreConfig::default();
        let (d_before, _) = d_score(&reference, &hypothesis, &cfg);
        let (d_after, _) = d_score(&reference, &grown, &cfg);
        prop_assert!(d_after >= d_before, "d-score fell: {} -> {}", d_before, d_after);

        let p_before = p_score(&reference, &hypothesis);
        let p_after = p_score(&reference, &grown);
        prop_assert!(p_after.0 >= p_before.0, "positive f1 fell: {} -> {}", p_before.0, p_after.0);
        prop_assert!(p_after.2 >= p_before.2, "p-score fell: {} -> {}", p_before.2, p_after.2);
    }

    #[test]
    fn correlations_flip_sign_when_one_side_is_negated((x, y) in tie_free_pair()) {
        let negated: Vec<f64> = y.iter().map(|v| -v).collect();

        let tau = kendall_tau_b(&x, &y).unwrap();
        let tau_neg = kendall_tau_b(&x, &negated).unwrap();
        prop_assert!((tau + tau_neg).abs() <= 1e-12, "tau {} vs {}", tau, tau_neg);

        let rho = spearman(&x, &y).unwrap();
        let rho_neg = spearman(&x, &negated).unwrap();
        prop_assert!((rho + rho_neg).abs() <= 1e-12, "rho {} vs {}", rho, rho_neg);
    }

    #[test]
    fn correlations_ignore_strictly_increasing_transforms((x, y) in tie_free_pair()) {
        // Both transforms are exact in f64 on these integer-valued
        // inputs, so ranks and orderings are preserved exactly.
        let scaled_x: Vec<f64> = x.iter().map(|v| v * 4.0).collect();
        let affine_y: Vec<f64> = y.iter().map(|v| 3.0 * v + 1.0).collect();

        let tau = kendall_tau_b(&x, &y).unwrap();
        let tau_t = kendall_tau_b(&scaled_x, &affine_y).unwrap();
        prop_assert_eq!(tau.to_bits(), tau_t.to_bits());

        let rho = spearman(&x, &y).unwrap();
        let rho_t = spearman(&scaled_x, &affine_y).unwrap();
        prop_assert_eq!(rho.to_bits(), rho_t.to_bits());
    }

    #[test]
    fn transform_invariance_holds_with_ties(
        x in prop::collection::vec(0i32..5, 3..=25),
        y_seed in prop::collection::vec(0i32..5, 25),
    ) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = y_seed[..x.len()].iter().map(|&v| f64::from(v)).collect();
        let tx: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        let ty: Vec<f64> = y.iter().map(|v| v * 4.0).collect();

        match (kendall_tau_b(&x, &y), kendall_tau_b(&tx, &ty)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "divergent outcomes: {:?} vs {:?}", a, b),
        }
        match (spearman(&x, &y), spearman(&tx, &ty)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "divergent outcomes: {:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn extraction_is_deterministic_and_well_formed(text in medical_text()) {
        let lexicon = KeywordLexicon::bundled();
        let first = extract_report(&text, lexicon, &RuleRewriter);
        let second = extract_report(&text, lexicon, &RuleRewriter);
        prop_assert_eq!(&second, &first);

        prop_assert!(canonical_form(&first).is_ok(), "extracted report fails validation");

        let known = bundled_disease_names();
        for finding in &first.positives {
            prop_assert!(
                known.contains(&normalize_name(&finding.name)),
                "hallucinated positive {:?}",
                finding.name
            );
        }
        for name in &first.negatives {
            prop_assert!(
                known.contains(&normalize_name(name)),
                "hallucinated negative {:?}",
                name
            );
        }
    }

    #[test]
    fn appended_unrelated_sentence_leaves_extraction_unchanged(text in medical_text()) {
        let lexicon = KeywordLexicon::bundled();
        let base = extract_report(&text, lexicon, &RuleRewriter);
        let extended = format!("{text}. the comparison study was reviewed yesterday.");
        let grown = extract_report(&extended, lexicon, &RuleRewriter);
        prop_assert_eq!(grown, base);
    }

    #[test]
    fn corpus_stats_add_over_partitions(
        a in prop::collection::vec(valid_report(), 0..6),
        b in prop::collection::vec(valid_report(), 0..6),
    ) {
        let mut combined = a.clone();
        combined.extend(b.iter().cloned());
        let (sa, sb, sc) = (corpus_stats(&a), corpus_stats(&b), corpus_stats(&combined));

        prop_assert_eq!(sc.report_count, sa.report_count + sb.report_count);

        let mut merged_diseases = sa.disease_frequency.clone();
        for (name, count) in &sb.disease_frequency {
            *merged_diseases.entry(name.clone()).or_insert(0) += count;
        }
        prop_assert_eq!(&sc.disease_frequency, &merged_diseases);

        let mut merged_probability = sa.probability_histogram.clone();
        for (key, count) in &sb.probability_histogram {
            *merged_probability.entry(*key).or_insert(0) += count;
        }
        prop_assert_eq!(&sc.probability_histogram, &merged_probability);

        let mut merged_levels = sa.level_histogram.clone();
        for (key, count) in &sb.level_histogram {
            *merged_levels.entry(key.clone()).or_insert(0) += count;
        }
        prop_assert_eq!(&sc.level_histogram, &merged_levels);

        // The location rate is located positives over all positives;
        // recover the counts from each side and recombine.
        let positives = |stats: &sreval::corpus::CorpusStats| -> usize {
            stats.probability_histogram.values().sum()
        };
        let located = |stats: &sreval::corpus::CorpusStats| -> f64 {
            (stats.location_presence_rate * positives(stats) as f64).round()
        };
        let total = positives(&sc);
        let expected_rate = if total == 0 {
            0.0
        } else {
            (located(&sa) + located(&sb)) / total as f64
        };
        prop_assert!(
            (sc.location_presence_rate - expected_rate).abs() <= 1e-9,
            "rate {} vs recombined {}",
            sc.location_presence_rate,
            expected_rate
        );
    }

    #[test]
    fn rendering_is_clean_and_injective(
        first in renderable_report(),
        second in renderable_report(),
    ) {
        let table = HedgeTable::default();
        let c1 = canonical_form(&first).unwrap();
        let c2 = canonical_form(&second).unwrap();
        let t1 = render_report(&c1, &table);
        let t2 = render_report(&c2, &table);

        for text in [&t1, &t2] {
            prop_assert!(!text.contains("  "), "double space in {:?}", text);
            prop_assert!(
                text.is_empty() || text.ends_with('.'),
                "unterminated rendering {:?}",
                text
            );
        }
        prop_assert_eq!(t1.is_empty(), c1.is_empty());

        if c1 != c2 {
            prop_assert_ne!(t1, t2, "distinct reports rendered identically");
        }
    }
}

/// The merge logic above assumes histogram keys are fixed, which the
/// stats contract guarantees; spot-check that here so a contract
/// change fails loudly rather than silently weakening the merge test.
#[test]
fn histogram_keys_are_fixed_even_for_empty_corpora() {
    let stats = corpus_stats(&[]);
    assert_eq!(stats.probability_histogram.keys().copied().collect::<Vec<u8>>(), vec![1, 2, 3]);
    assert_eq!(stats.level_histogram.len(), 4);
}

/// Keeps the pools honest: every pool name must survive normalization
/// unchanged, or the injectivity argument above falls apart.
#[test]
fn pool_names_are_already_normalized() {
    for name in NAME_POOL {
        assert_eq!(normalize_name(name), *name);
    }
}
