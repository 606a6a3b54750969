use std::path::PathBuf;

use babelkit_core::model::random_prompts;
use babelkit_core::{ablation_grid, compare_outputs, load_checkpoint, TokenSequence};
use clap::{Args, ValueEnum};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::io::{read_json, sibling, write_json, Run};
use crate::Output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Fail with exit 3 unless every logit is bitwise equal.
    Identity,
    /// Report deviation statistics.
    Deviation,
    /// Run the placement x initialization grid on the base checkpoint.
    Grid,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub base: PathBuf,
    /// Extended checkpoint (identity and deviation modes).
    #[arg(long, required_if_eq_any([("mode", "identity"), ("mode", "deviation")]))]
    pub extended: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Deviation)]
    pub mode: Mode,
    /// JSON list of token-id lists; overrides the generated prompts.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub num_prompts: usize,
    #[arg(long, default_value_t = 16)]
    pub prompt_len: usize,
    #[arg(long, default_value_t = 0)]
    pub prompt_seed: u64,
    /// Layers to add per grid cell.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Noise means for the grid (comma-separated).
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.0001])]
    pub means: Vec<f64>,
    /// Surgery seeds for the grid (comma-separated).
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
    pub seeds: Vec<u64>,
    /// Write the JSON result here as well as to stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn run(args: VerifyArgs, out: &Output) -> CliResult<()> {
    let run = Run::start("verify");
    let base = load_checkpoint(&args.base)?;
    let prompts: Vec<TokenSequence> = match &args.prompts {
        Some(p) => read_json(p)?,
        None => random_prompts(base.config.vocab_size, args.num_prompts, args.prompt_len, args.prompt_seed)?,
    };
    let mut inputs = vec![args.base.clone()];
    inputs.extend(args.prompts.clone());

    let (result, failure) = match args.mode {
        Mode::Grid => {
            let report = ablation_grid(&base, args.k, &args.means, &args.seeds, &prompts)?;
            if out.pretty {
                println!("{:<13} {:<44} {:>12} {:>12}", "strategy", "init", "mean|d|", "max|d|");
                for c in &report.cells {
                    println!("{:<13} {:<44} {:>12.4e} {:>12.4e}", c.strategy, c.init.to_string(), c.mean_abs, c.max_abs);
                }
            }
            (serde_json::to_value(&report).map_err(CliError::io)?, None)
        }
        Mode::Identity | Mode::Deviation => {
            let path = args.extended.as_ref().expect("required by clap");
            inputs.push(path.clone());
            let extended = load_checkpoint(path)?;
            let stats = compare_outputs(&base, &extended, &prompts)?;
            if out.pretty {
                println!("prompts   {}", stats.per_prompt.len());
                println!("mean|d|   {:e}", stats.mean_abs);
                println!("max|d|    {:e}", stats.max_abs);
            }
            let failure = (args.mode == Mode::Identity && !stats.is_zero()).then(|| {
                format!("outputs differ: max |logit difference| = {:e}", stats.max_abs)
            });
            (serde_json::to_value(&stats).map_err(CliError::io)?, failure)
        }
    };
    if !out.pretty {
        out.print_json(&result)?;
    }
    if let Some(p) = &args.output {
        write_json(p, &result)?;
    }
    run.finish(
        args.output.as_ref().map(|p| sibling(p, ".run.json")).as_deref(),
        json!({
            "base": args.base,
            "extended": args.extended,
            "mode": format!("{:?}", args.mode).to_lowercase(),
            "prompts": args.prompts,
            "num_prompts": prompts.len(),
            "prompt_len": args.prompt_len,
            "prompt_seed": args.prompt_seed,
            "k": args.k,
            "means": args.means,
            "seeds": args.seeds,
        }),
        inputs,
        args.output.iter().cloned().collect(),
        Some(args.prompt_seed),
        json!({ "prompts": prompts.len(), "passed": failure.is_none() }),
    )?;
    match failure {
        Some(msg) => Err(CliError::verification(msg)),
        None => Ok(()),
    }
}
