use std::path::PathBuf;

use babelkit_core::{parse_budget, sample_manifest, stage1_allocation, stage2_allocation};
use babelkit_core::{CorpusStats, DocIndex, MixturePlan};
use clap::Args;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::io::{read_corpus, read_json, sibling, write_json, Run};
use crate::Output;

#[derive(Debug, Args)]
pub struct MixArgs {
    /// Corpus statistics (JSON), as written by `stats`.
    #[arg(long)]
    pub stats: PathBuf,
    /// Token budget; accepts K, M, B and T suffixes (e.g. 1.5B).
    #[arg(long)]
    pub budget: String,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub stage: u8,
    /// Stage-2 multiplier for low-resource languages.
    #[arg(long, default_value_t = 2.0)]
    pub low_boost: f64,
    /// Stage-2 multiplier for textbook data.
    #[arg(long, default_value_t = 2.0)]
    pub textbook_boost: f64,
    /// Plan output (JSON).
    #[arg(long, short)]
    pub output: PathBuf,
    /// Corpus to draw a document manifest from.
    #[arg(long, requires = "sample_output")]
    pub sample_from: Option<PathBuf>,
    /// Where to write the sampled document manifest.
    #[arg(long, requires = "sample_from")]
    pub sample_output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub strict: bool,
}

pub fn run(args: MixArgs, out: &Output) -> CliResult<()> {
    let run = Run::start("mix");
    let budget = parse_budget(&args.budget)?;
    let raw: CorpusStats = read_json(&args.stats)?;
    let stats = raw.canonicalized()?;
    let plan: MixturePlan = match args.stage {
        1 => stage1_allocation(&stats, budget)?,
        _ => stage2_allocation(&stats, budget, args.low_boost, args.textbook_boost)?,
    };
    write_json(&args.output, &plan)?;
    let mut inputs = vec![args.stats.clone()];
    let mut outputs = vec![args.output.clone()];
    if let (Some(corpus), Some(dest)) = (&args.sample_from, &args.sample_output) {
        let (docs, _) = read_corpus(corpus, args.strict)?;
        let index = DocIndex::from_documents(&docs, plan.unit);
        let manifest = sample_manifest(&plan, &index, args.seed).map_err(CliError::invalid)?;
        write_json(dest, &manifest)?;
        inputs.push(corpus.clone());
        outputs.push(dest.clone());
    }
    if out.pretty {
        println!("stage {}  budget {}  allocated {}", plan.stage, plan.budget, plan.total);
        for (lang, total) in &plan.language_totals {
            let class = babelkit_core::classify_resource(lang).map(|c| c.to_string()).unwrap_or_else(|_| "?".into());
            println!("{lang:<4} {class:<4} {total:>14} / {:<14}", stats.language_total(lang));
        }
    } else {
        out.print_json(&json!({
            "stage": plan.stage,
            "budget": plan.budget,
            "total": plan.total,
            "language_totals": plan.language_totals,
        }))?;
    }
    let stage2 = args.stage == 2;
    run.finish(
        Some(&sibling(&args.output, ".run.json")),
        json!({
            "stats": args.stats,
            "budget": budget,
            "budget_arg": args.budget,
            "stage": args.stage,
            "low_boost": stage2.then_some(args.low_boost),
            "textbook_boost": stage2.then_some(args.textbook_boost),
            "output": args.output,
            "sample_from": args.sample_from,
            "sample_output": args.sample_output,
            "unit": plan.unit,
            "strict": args.strict,
        }),
        inputs,
        outputs,
        Some(args.seed),
        json!({ "languages": plan.language_totals.len(), "allocated": plan.total }),
    )
}
