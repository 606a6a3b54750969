use std::path::PathBuf;

use babelkit_core::surgery::DEFAULT_NOISE_MEAN;
use babelkit_core::{apply_extension, count_parameters, load_checkpoint, plan_extension, save_checkpoint};
use babelkit_core::{ExtensionPlan, InitMethod, Placement};
use clap::{ArgGroup, Args, ValueEnum};
use serde_json::json;

use crate::error::CliResult;
use crate::io::{sibling, write_json, Run};
use crate::Output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Duplicate,
    Noise,
    Zeros,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("placement").required(true).args(["positions", "auto_k", "after_model"])))]
pub struct ExtendArgs {
    /// Checkpoint to extend; its config is read from the sibling .config.json.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Destination checkpoint.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Insert a copy after each of these original layers (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub positions: Vec<usize>,
    /// Insert K layers in the second half of the model, one every other layer.
    #[arg(long, value_name = "K")]
    pub auto_k: Option<usize>,
    /// Append N copies of the last layer.
    #[arg(long, value_name = "N")]
    pub after_model: Option<usize>,
    #[arg(long, value_enum, default_value_t = InitArg::Noise)]
    pub init: InitArg,
    /// Mean and standard deviation of the noise for --init noise.
    #[arg(long, default_value_t = DEFAULT_NOISE_MEAN)]
    pub noise_mean: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Surgery record path [default: <output>.surgery.json]
    #[arg(long)]
    pub record: Option<PathBuf>,
}

pub fn run(args: ExtendArgs, out: &Output) -> CliResult<()> {
    let run = Run::start("extend");
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let init = match args.init {
        InitArg::Duplicate => InitMethod::Duplicate,
        InitArg::Noise => InitMethod::DuplicateNoise { mean: args.noise_mean },
        InitArg::Zeros => InitMethod::Zeros,
    };
    let placement = if let Some(k) = args.auto_k {
        plan_extension(&ckpt.config, k)?.placement
    } else if let Some(count) = args.after_model {
        Placement::AfterModel { count }
    } else {
        Placement::AmongLayers { positions: args.positions.clone() }
    };
    let plan = ExtensionPlan { placement, init, seed: args.seed };
    let (extended, record) = apply_extension(&ckpt, &plan)?;

    let record_path = args.record.clone().unwrap_or_else(|| sibling(&args.output, ".surgery.json"));
    save_checkpoint(&extended, &args.output)?;
    write_json(&record_path, &record)?;

    let params_before = count_parameters(&ckpt.config).unwrap_or(0);
    let params_after = count_parameters(&extended.config).unwrap_or(0);
    if out.pretty {
        println!("layers      {} -> {}", record.old_num_layers, record.new_num_layers);
        println!("parameters  {params_before} -> {params_after}");
        println!("strategy    {}", record.strategy);
        println!("init        {}", record.init);
        println!("source  new");
        for l in &record.inserted {
            println!("{:>6}  {:>3}", l.source_layer, l.new_layer);
        }
    } else {
        out.print_json(&record)?;
    }
    let cfg = babelkit_core::checkpoint::config_path(&args.output);
    run.finish(
        Some(&sibling(&args.output, ".run.json")),
        json!({
            "checkpoint": args.checkpoint,
            "output": args.output,
            "record": record_path,
            "plan": plan,
        }),
        vec![args.checkpoint.clone(), babelkit_core::checkpoint::config_path(&args.checkpoint)],
        vec![args.output.clone(), cfg, record_path],
        Some(args.seed),
        json!({ "parameters_before": params_before, "parameters_after": params_after, "inserted": record.inserted.len() }),
    )
}
