use std::collections::BTreeMap;
use std::path::PathBuf;

use babelkit_core::corpus::read_scores;
use babelkit_core::dedup::write_pairs_tsv;
use babelkit_core::filter::{clean_corpus, Gate};
use babelkit_core::{dedup, CorpusStats, FilterRules, MinHashParams, TokenUnit};
use clap::Args;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::io::{open, read_corpus, sibling, write_atomic, write_docs, write_json, Run};
use crate::Output;

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Input corpus (JSONL documents).
    #[arg(long, short)]
    pub input: PathBuf,
    /// Kept documents (JSONL).
    #[arg(long, short)]
    pub output: PathBuf,
    /// Rejection log [default: <output>.rejected.jsonl]
    #[arg(long)]
    pub rejected: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub min_chars: usize,
    #[arg(long, default_value_t = 0.3)]
    pub max_digit_ratio: f64,
    /// Keep documents scoring at least this; no score gate when absent.
    #[arg(long)]
    pub score_threshold: Option<f64>,
    /// JSONL of {"id", "score"}; overrides scores carried on documents.
    #[arg(long, requires = "score_threshold")]
    pub scores: Option<PathBuf>,
    /// Abort on the first malformed input line.
    #[arg(long)]
    pub strict: bool,
}

pub fn clean(args: CleanArgs, out: &Output) -> CliResult<()> {
    let run = Run::start("clean");
    let rules = FilterRules { min_chars: args.min_chars, max_digit_ratio: args.max_digit_ratio };
    rules.validate().map_err(CliError::invalid)?;
    let (docs, skipped) = read_corpus(&args.input, args.strict)?;
    let sidecar = match &args.scores {
        Some(p) => Some(read_scores(open(p)?).map_err(|e| CliError::from(e).context(p.display().to_string()))?),
        None => None,
    };
    let gate = args.score_threshold.map(|threshold| Gate { threshold, sidecar: sidecar.as_ref() });
    let outcome = clean_corpus(docs, &rules, gate).map_err(CliError::invalid)?;

    let rejected_path = args.rejected.clone().unwrap_or_else(|| sibling(&args.output, ".rejected.jsonl"));
    write_docs(&args.output, &outcome.kept)?;
    write_atomic(&rejected_path, |w| babelkit_core::write_jsonl(w, &outcome.rejected))?;

    let mut counts = outcome.counts();
    counts.insert("malformed".into(), skipped.len());
    out.summary(&counts)?;
    let mut inputs = vec![args.input.clone()];
    inputs.extend(args.scores.clone());
    run.finish(
        Some(&sibling(&args.output, ".run.json")),
        json!({
            "input": args.input,
            "output": args.output,
            "rejected": rejected_path,
            "min_chars": rules.min_chars,
            "max_digit_ratio": rules.max_digit_ratio,
            "score_threshold": args.score_threshold,
            "scores": args.scores,
            "strict": args.strict,
        }),
        inputs,
        vec![args.output.clone(), rejected_path],
        None,
        json!({ "reasons": counts, "skipped_lines": skipped }),
    )
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// Kept documents (JSONL).
    #[arg(long, short)]
    pub output: PathBuf,
    /// Report path [default: <output>.report.json]
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also dump candidate pairs as TSV.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub shingle_k: usize,
    #[arg(long, default_value_t = 256)]
    pub num_perm: usize,
    #[arg(long, default_value_t = 32)]
    pub bands: usize,
    #[arg(long, default_value_t = 8)]
    pub rows: usize,
    #[arg(long, default_value_t = 0.8)]
    pub threshold: f64,
    #[arg(long)]
    pub strict: bool,
}

pub fn dedup_cmd(args: DedupArgs, out: &Output) -> CliResult<()> {
    let run = Run::start("dedup");
    let params = MinHashParams {
        shingle_k: args.shingle_k,
        num_perm: args.num_perm,
        bands: args.bands,
        rows: args.rows,
        jaccard_threshold: args.threshold,
        seed: args.seed,
    };
    params.validate()?;
    let (docs, skipped) = read_corpus(&args.input, args.strict)?;
    let (kept, report) = dedup(docs, &params)?;

    let report_path = args.report.clone().unwrap_or_else(|| sibling(&args.output, ".report.json"));
    write_docs(&args.output, &kept)?;
    write_json(&report_path, &report)?;
    let mut outputs = vec![args.output.clone(), report_path.clone()];
    if let Some(p) = &args.pairs {
        write_atomic(p, |w| write_pairs_tsv(w, &report.candidate_pairs))?;
        outputs.push(p.clone());
    }

    let exact_removed = report.exact_groups.iter().map(|g| g.len() - 1).sum::<usize>();
    let counts = BTreeMap::from([
        ("input", report.input_count),
        ("kept", report.kept.len()),
        ("removed", report.removed.len()),
        ("removed_exact", exact_removed),
        ("removed_near", report.removed.len() - exact_removed),
        ("candidate_pairs", report.candidate_pairs.len()),
        ("clusters", report.clusters.len()),
        ("bypassed", report.bypassed.len()),
        ("malformed", skipped.len()),
    ]);
    out.summary(&counts)?;
    run.finish(
        Some(&sibling(&args.output, ".run.json")),
        json!({
            "input": args.input,
            "output": args.output,
            "report": report_path,
            "pairs": args.pairs,
            "params": params,
            "strict": args.strict,
        }),
        vec![args.input.clone()],
        outputs,
        Some(args.seed),
        json!({ "totals": counts, "skipped_lines": skipped }),
    )
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// Corpus statistics (JSON) for `mix`.
    #[arg(long, short)]
    pub output: PathBuf,
    /// What counts as a token: words or chars.
    #[arg(long, default_value = "words")]
    pub unit: TokenUnit,
    #[arg(long)]
    pub strict: bool,
}

pub fn stats(args: StatsArgs, out: &Output) -> CliResult<()> {
    let run = Run::start("stats");
    let (docs, skipped) = read_corpus(&args.input, args.strict)?;
    let stats = CorpusStats::from_documents(&docs, args.unit);
    write_json(&args.output, &stats)?;
    if out.pretty {
        for (lang, cells) in &stats.tokens {
            let row: Vec<String> = cells.iter().map(|(c, n)| format!("{c}={n}")).collect();
            println!("{lang:<4} {:>12}  {}", stats.language_total(lang), row.join(" "));
        }
    } else {
        out.print_json(&stats)?;
    }
    run.finish(
        Some(&sibling(&args.output, ".run.json")),
        json!({ "input": args.input, "output": args.output, "unit": args.unit, "strict": args.strict }),
        vec![args.input.clone()],
        vec![args.output.clone()],
        None,
        json!({ "documents": docs.len(), "total_tokens": stats.total(), "skipped_lines": skipped }),
    )
}
