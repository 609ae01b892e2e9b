//! Command-line front end for the report evaluation toolkit.
//!
//! Exit codes are a stable contract: 0 success, 1 usage error, 2 data
//! error (unreadable or unpairable inputs), 3 output error. `--lenient`
//! downgrades per-line data problems to warnings where a command
//! supports it. Every command is deterministic: the same inputs and
//! flags produce byte-identical output files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sreval::corpus::{
    corpus_stats, pair_by_id, read_corpus, records_to_reports, write_reports, write_results,
    write_texts, CorpusError, LineError, RecordKind,
};
use sreval::correlation::{kendall_tau_a, kendall_tau_b, spearman, CorrelationError};
use sreval::extraction::{
    extract_report, IdentityRewriter, LoadedLexicon, LocationRewriter, RuleRewriter,
};
use sreval::nlg::{BleuConfig, Smoothing};
use sreval::render::{render_report, HedgeTable};
use sreval::report::StructuredReport;
use sreval::score::{evaluate_corpus, DetailWeights, ScoreConfig};

#[derive(Parser)]
#[command(name = "sreval", version, about = "Evaluate structured radiology reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a hypothesis corpus against a reference corpus
    Evaluate(EvaluateArgs),
    /// Extract structured reports from free-text findings
    Extract(ExtractArgs),
    /// Render structured reports as templated sentences
    Render(RenderArgs),
    /// Repair malformed report JSON and write the validated form
    Repair(RepairArgs),
    /// Correlate per-report scores with human ratings
    Correlate(CorrelateArgs),
    /// Summarize a structured corpus
    Stats(StatsArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Structured,
    FreeText,
}

impl From<KindArg> for RecordKind {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::Structured => RecordKind::Structured,
            KindArg::FreeText => RecordKind::FreeText,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SmoothingArg {
    None,
    Add1,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RewriterArg {
    Rules,
    Identity,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TauArg {
    B,
    A,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Reference corpus (JSONL)
    refs: PathBuf,
    /// Hypothesis corpus (JSONL)
    hyps: PathBuf,
    /// How to read the reference corpus
    #[arg(long, value_enum, default_value_t = KindArg::Structured)]
    refs_kind: KindArg,
    /// How to read the hypothesis corpus
    #[arg(long, value_enum, default_value_t = KindArg::Structured)]
    hyps_kind: KindArg,
    /// Lexicon file (defaults to the bundled one)
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Detail weights as probability,level,location; must sum to 1
    #[arg(long, value_parser = parse_weights)]
    weights: Option<DetailWeights>,
    /// Largest n-gram order for the location sub-score
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(1..))]
    bleu_max_n: u8,
    /// Smoothing for the location sub-score
    #[arg(long, value_enum, default_value_t = SmoothingArg::Add1)]
    smoothing: SmoothingArg,
    /// Location rephraser for free-text extraction
    #[arg(long, value_enum, default_value_t = RewriterArg::Rules)]
    rewriter: RewriterArg,
    /// Score what pairs up, warning about broken or unpaired records
    /// instead of failing
    #[arg(long)]
    lenient: bool,
    /// Per-pair results file; a .summary.json sidecar goes next to it
    #[arg(long, default_value = "results.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    /// Free-text corpus (JSONL with "text" fields)
    input: PathBuf,
    /// Lexicon file (defaults to the bundled one)
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Location rephraser
    #[arg(long, value_enum, default_value_t = RewriterArg::Rules)]
    rewriter: RewriterArg,
    /// Warn about broken lines instead of failing
    #[arg(long)]
    lenient: bool,
    /// Structured corpus to write
    #[arg(long, default_value = "extracted.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Structured corpus (JSONL with "report" fields)
    input: PathBuf,
    /// Lexicon file supplying the hedge table (defaults to the bundled
    /// one)
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Warn about broken lines instead of failing
    #[arg(long)]
    lenient: bool,
    /// Free-text corpus to write
    #[arg(long, default_value = "rendered.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct RepairArgs {
    /// Corpus of raw model output (JSONL, "report" as object or string)
    input: PathBuf,
    /// Accept lines that stay unusable after repair, with warnings
    #[arg(long)]
    lenient: bool,
    /// Repaired structured corpus to write; a .repairs.json sidecar
    /// logs what was applied
    #[arg(long, default_value = "repaired.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct CorrelateArgs {
    /// Per-pair results file written by evaluate
    results: PathBuf,
    /// Ratings corpus (JSONL with "id" and numeric "rating")
    ratings: PathBuf,
    /// Kendall tau variant
    #[arg(long, value_enum, default_value_t = TauArg::B)]
    tau: TauArg,
}

#[derive(Args)]
struct StatsArgs {
    /// Structured corpus (JSONL with "report" fields)
    input: PathBuf,
    /// Warn about broken lines instead of failing
    #[arg(long)]
    lenient: bool,
    /// Statistics object to write
    #[arg(long, default_value = "stats.json")]
    out: PathBuf,
}

fn parse_weights(raw: &str) -> Result<DetailWeights, String> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated weights, got {}", parts.len()));
    }
    let mut values = [0.0f64; 3];
    for (slot, part) in values.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("{part:?} is not a number"))?;
    }
    DetailWeights::new(values[0], values[1], values[2]).map_err(|e| e.to_string())
}

/// What went wrong, carrying the documented exit code.
#[derive(Debug)]
enum Failure {
    /// Unreadable, unparseable, or unpairable input.
    Data(String),
    /// The work was done but could not be written out.
    Output(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Data(_) => 2,
            Failure::Output(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Data(message) | Failure::Output(message) => f.write_str(message),
        }
    }
}

fn data(err: impl fmt::Display) -> Failure {
    Failure::Data(err.to_string())
}

fn output(err: impl fmt::Display) -> Failure {
    Failure::Output(err.to_string())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Render(args) => cmd_render(args),
        Command::Repair(args) => cmd_repair(args),
        Command::Correlate(args) => cmd_correlate(args),
        Command::Stats(args) => cmd_stats(args),
    };
    if let Err(failure) = result {
        eprintln!("error: {failure}");
        std::process::exit(failure.code());
    }
}

fn load_lexicon(path: Option<&Path>) -> Result<LoadedLexicon, Failure> {
    match path {
        Some(path) => LoadedLexicon::from_path(path).map_err(data),
        None => Ok(LoadedLexicon::bundled()),
    }
}

fn make_rewriter(arg: RewriterArg) -> Box<dyn LocationRewriter> {
    match arg {
        RewriterArg::Rules => Box::new(RuleRewriter),
        RewriterArg::Identity => Box::new(IdentityRewriter),
    }
}

/// Strict mode fails on the first broken lines; lenient mode logs each
/// one and carries on.
fn handle_line_errors(path: &Path, errors: &[LineError], lenient: bool) -> Result<(), Failure> {
    if errors.is_empty() {
        return Ok(());
    }
    if lenient {
        for e in errors {
            log::warn!("{}:{}: {}", path.display(), e.line, e.message);
        }
        return Ok(());
    }
    let shown: Vec<String> = errors
        .iter()
        .take(5)
        .map(|e| format!("{}:{}: {}", path.display(), e.line, e.message))
        .collect();
    let mut message = format!("{} broken line(s) in {}:\n  {}", errors.len(), path.display(), shown.join("\n  "));
    if errors.len() > shown.len() {
        message.push_str("\n  ...");
    }
    message.push_str("\nuse --lenient to skip them");
    Err(Failure::Data(message))
}

fn load_reports(
    path: &Path,
    kind: KindArg,
    lenient: bool,
    loaded: &LoadedLexicon,
    rewriter: &dyn LocationRewriter,
) -> Result<Vec<(String, StructuredReport)>, Failure> {
    let (records, errors) = read_corpus(path, kind.into()).map_err(data)?;
    handle_line_errors(path, &errors, lenient)?;
    match kind {
        KindArg::Structured => records_to_reports(&records).map_err(data),
        KindArg::FreeText => Ok(records
            .iter()
            .map(|r| (r.id.clone(), extract_report(&r.payload, &loaded.lexicon, rewriter)))
            .collect()),
    }
}

fn fmt_mean(mean: Option<f64>) -> String {
    match mean {
        Some(value) => format!("{value:.3}"),
        None => "n/a".to_string(),
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let loaded = load_lexicon(args.lexicon.as_deref())?;
    let rewriter = make_rewriter(args.rewriter);
    let refs = load_reports(&args.refs, args.refs_kind, args.lenient, &loaded, rewriter.as_ref())?;
    let hyps = load_reports(&args.hyps, args.hyps_kind, args.lenient, &loaded, rewriter.as_ref())?;

    let pairing = pair_by_id(&refs, &hyps);
    if !pairing.missing_in_hyps.is_empty() || !pairing.missing_in_refs.is_empty() {
        let preview = |ids: &[String]| -> String {
            let mut shown: Vec<&str> = ids.iter().take(5).map(String::as_str).collect();
            if ids.len() > shown.len() {
                shown.push("...");
            }
            shown.join(", ")
        };
        let mut message = format!(
            "unpaired ids: {} reference-only, {} hypothesis-only",
            pairing.missing_in_hyps.len(),
            pairing.missing_in_refs.len()
        );
        if !pairing.missing_in_hyps.is_empty() {
            message.push_str(&format!(" [reference-only: {}]", preview(&pairing.missing_in_hyps)));
        }
        if !pairing.missing_in_refs.is_empty() {
            message.push_str(&format!(" [hypothesis-only: {}]", preview(&pairing.missing_in_refs)));
        }
        if args.lenient {
            log::warn!("{message}; scoring the {} paired id(s)", pairing.pairs.len());
        } else {
            return Err(Failure::Data(format!(
                "{message} (use --lenient to score the intersection)"
            )));
        }
    }

    let config = ScoreConfig {
        weights: args.weights.unwrap_or_default(),
        bleu: BleuConfig {
            max_n: args.bleu_max_n as usize,
            smoothing: match args.smoothing {
                SmoothingArg::None => Smoothing::None,
                SmoothingArg::Add1 => Smoothing::AddOne,
            },
            ..BleuConfig::default()
        },
    };
    let scores = evaluate_corpus(&pairing.pairs, &config).map_err(data)?;
    write_results(&args.out, &scores, &config, &loaded.sha256).map_err(output)?;

    println!("scored {} pair(s) -> {}", scores.rows.len(), args.out.display());
    println!("P-Score  {}", fmt_mean(scores.mean_p));
    println!("D-Score  {}", fmt_mean(scores.mean_d));
    println!("S-Score  {}", fmt_mean(scores.mean_s));
    Ok(())
}

fn cmd_extract(args: ExtractArgs) -> Result<(), Failure> {
    let loaded = load_lexicon(args.lexicon.as_deref())?;
    let rewriter = make_rewriter(args.rewriter);
    let (records, errors) = read_corpus(&args.input, RecordKind::FreeText).map_err(data)?;
    handle_line_errors(&args.input, &errors, args.lenient)?;
    let reports: Vec<(String, StructuredReport)> = records
        .iter()
        .map(|r| (r.id.clone(), extract_report(&r.payload, &loaded.lexicon, rewriter.as_ref())))
        .collect();
    write_reports(&args.out, &reports).map_err(output)?;
    println!("extracted {} report(s) -> {}", reports.len(), args.out.display());
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<(), Failure> {
    let loaded = load_lexicon(args.lexicon.as_deref())?;
    let table = match &loaded.hedge_render {
        Some(rows) => HedgeTable::try_from_map(rows).map_err(data)?,
        None => HedgeTable::default(),
    };
    let (records, errors) = read_corpus(&args.input, RecordKind::Structured).map_err(data)?;
    handle_line_errors(&args.input, &errors, args.lenient)?;
    let reports = records_to_reports(&records).map_err(data)?;
    let texts: Vec<(String, String)> = reports
        .into_iter()
        .map(|(id, report)| (id, render_report(&report, &table)))
        .collect();
    write_texts(&args.out, &texts).map_err(output)?;
    println!("rendered {} report(s) -> {}", texts.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct RepairedEntry<'a> {
    id: &'a str,
    rules: Vec<&'static str>,
    original_length: usize,
    repaired_length: usize,
}

#[derive(Serialize)]
struct FailedEntry<'a> {
    line: usize,
    message: &'a str,
}

#[derive(Serialize)]
struct RepairSidecar<'a> {
    repaired: Vec<RepairedEntry<'a>>,
    failed: Vec<FailedEntry<'a>>,
}

fn cmd_repair(args: RepairArgs) -> Result<(), Failure> {
    let (records, errors) = match read_corpus(&args.input, RecordKind::Structured) {
        Ok(outcome) => outcome,
        // A corpus where nothing survives still deserves its sidecar,
        // so synthesize an all-failed outcome instead of bailing.
        Err(CorpusError::AllLinesFailed { .. }) => {
            let raw = std::fs::read_to_string(&args.input)
                .map_err(|e| data(format!("cannot read {}: {e}", args.input.display())))?;
            let errors = raw
                .lines()
                .enumerate()
                .filter(|(_, line)| !line.trim().is_empty())
                .map(|(i, _)| LineError { line: i + 1, message: "unusable line".to_string() })
                .collect();
            (Vec::new(), errors)
        }
        Err(err) => return Err(data(err)),
    };

    let reports = records_to_reports(&records).map_err(data)?;
    write_reports(&args.out, &reports).map_err(output)?;

    let sidecar = RepairSidecar {
        repaired: records
            .iter()
            .map(|record| {
                let log = record.repair.as_ref().expect("structured records carry a log");
                RepairedEntry {
                    id: &record.id,
                    rules: log.applied.iter().map(|r| r.as_str()).collect(),
                    original_length: log.original_length,
                    repaired_length: log.repaired_length,
                }
            })
            .collect(),
        failed: errors
            .iter()
            .map(|e| FailedEntry { line: e.line, message: &e.message })
            .collect(),
    };
    let sidecar_path = args.out.with_extension("repairs.json");
    let mut text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    text.push('\n');
    std::fs::write(&sidecar_path, text).map_err(output)?;

    let modified = records
        .iter()
        .filter(|r| r.repair.as_ref().is_some_and(|log| !log.is_clean()))
        .count();
    println!(
        "repaired {} record(s) ({} modified) -> {}",
        records.len(),
        modified,
        args.out.display()
    );
    if !errors.is_empty() {
        handle_line_errors(&args.input, &errors, args.lenient)?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct ResultRow {
    id: String,
    p_score: f64,
    d_score: f64,
    s_score: f64,
}

#[derive(Deserialize)]
struct RatingRow {
    id: String,
    rating: f64,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, Failure> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (index, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: T = serde_json::from_str(line)
            .map_err(|e| data(format!("{}:{}: {e}", path.display(), index + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

fn to_unique_map<T>(
    rows: Vec<T>,
    id_of: impl Fn(&T) -> &str,
    path: &Path,
) -> Result<BTreeMap<String, T>, Failure> {
    let mut map = BTreeMap::new();
    for row in rows {
        let id = id_of(&row).to_string();
        if map.insert(id.clone(), row).is_some() {
            return Err(data(format!("duplicate id {id:?} in {}", path.display())));
        }
    }
    Ok(map)
}

fn cmd_correlate(args: CorrelateArgs) -> Result<(), Failure> {
    let results = to_unique_map(
        read_jsonl::<ResultRow>(&args.results)?,
        |row| &row.id,
        &args.results,
    )?;
    let ratings = to_unique_map(
        read_jsonl::<RatingRow>(&args.ratings)?,
        |row| &row.id,
        &args.ratings,
    )?;

    let mut p = Vec::new();
    let mut d = Vec::new();
    let mut s = Vec::new();
    let mut y = Vec::new();
    let mut unrated = 0usize;
    for (id, row) in &results {
        match ratings.get(id) {
            Some(rating) => {
                p.push(row.p_score);
                d.push(row.d_score);
                s.push(row.s_score);
                y.push(rating.rating);
            }
            None => unrated += 1,
        }
    }
    let unscored = ratings.keys().filter(|id| !results.contains_key(*id)).count();
    if unrated > 0 || unscored > 0 {
        log::warn!("unpaired ids: {unrated} result-only, {unscored} rating-only");
    }
    if y.len() < 2 {
        return Err(data(format!(
            "need at least two paired ids to correlate, found {}",
            y.len()
        )));
    }

    let (tau_name, tau): (&str, fn(&[f64], &[f64]) -> Result<f64, CorrelationError>) =
        match args.tau {
            TauArg::B => ("kendall-b", kendall_tau_b),
            TauArg::A => ("kendall-a", kendall_tau_a),
        };
    println!("{} paired id(s)", y.len());
    println!("{:<8}  {:>9}  {:>9}", "metric", tau_name, "spearman");
    for (name, xs) in [("d_score", &d), ("p_score", &p), ("s_score", &s)] {
        match (tau(xs, &y), spearman(xs, &y)) {
            (Ok(k), Ok(r)) => println!("{name:<8}  {k:>9.3}  {r:>9.3}"),
            (k, r) => {
                let why = k.err().or_else(|| r.err()).expect("one side failed");
                println!("{name:<8}  error: {why}");
            }
        }
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<(), Failure> {
    let (records, errors) = read_corpus(&args.input, RecordKind::Structured).map_err(data)?;
    handle_line_errors(&args.input, &errors, args.lenient)?;
    let reports: Vec<StructuredReport> = records_to_reports(&records)
        .map_err(data)?
        .into_iter()
        .map(|(_, report)| report)
        .collect();
    let stats = corpus_stats(&reports);

    let mut text = serde_json::to_string_pretty(&stats).expect("stats serialize");
    text.push('\n');
    std::fs::write(&args.out, text).map_err(output)?;

    println!("reports  {}", stats.report_count);
    println!("diseases:");
    let width = stats
        .disease_frequency
        .keys()
        .map(|name| name.len())
        .max()
        .unwrap_or(0);
    for (name, count) in &stats.disease_frequency {
        println!("  {name:<width$}  {count}");
    }
    println!("probability histogram:");
    for (value, count) in &stats.probability_histogram {
        println!("  {value}  {count}");
    }
    println!("severity histogram:");
    for (level, count) in &stats.level_histogram {
        println!("  {level:<11}  {count}");
    }
    println!("location presence rate  {:.3}", stats.location_presence_rate);
    println!("written -> {}", args.out.display());
    Ok(())
}
