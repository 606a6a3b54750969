use std::path::PathBuf;

use babelkit_core::mixture::registry::{export_json, LANGUAGES};
use babelkit_core::model::make_toy_checkpoint_as;
use babelkit_core::{count_parameters, load_checkpoint, save_checkpoint, DType, ModelConfig};
use clap::Args;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::io::{sibling, write_json, Run};
use crate::Output;

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub layers: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    #[arg(long, default_value_t = 2)]
    pub kv_heads: usize,
    #[arg(long, default_value_t = 64)]
    pub intermediate: usize,
    #[arg(long, default_value_t = 64)]
    pub vocab: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub rms_norm_eps: f64,
    #[arg(long, default_value_t = 10_000.0)]
    pub rope_theta: f64,
    /// F32, F16 or BF16.
    #[arg(long, default_value = "F32")]
    pub dtype: DType,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Writes a seeded random checkpoint for experiments and tests.
pub fn toy(args: ToyArgs, out: &Output) -> CliResult<()> {
    let run = Run::start("toy");
    let config = ModelConfig {
        num_layers: args.layers,
        hidden_size: args.hidden,
        num_attention_heads: args.heads,
        num_kv_heads: args.kv_heads,
        intermediate_size: args.intermediate,
        vocab_size: args.vocab,
        rms_norm_eps: args.rms_norm_eps,
        rope_theta: args.rope_theta,
    };
    config.validate().map_err(CliError::invalid)?;
    let ckpt = make_toy_checkpoint_as(&config, args.seed, args.dtype)?;
    save_checkpoint(&ckpt, &args.output)?;
    let params = count_parameters(&config).map_err(CliError::invalid)?;
    out.print_json(&json!({ "output": args.output, "parameters": params, "config": config }))?;
    run.finish(
        Some(&sibling(&args.output, ".run.json")),
        json!({ "output": args.output, "config": config, "dtype": args.dtype.as_str(), "seed": args.seed }),
        vec![],
        vec![args.output.clone(), babelkit_core::checkpoint::config_path(&args.output)],
        Some(args.seed),
        json!({ "parameters": params }),
    )
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
}

/// Prints config, tensor listing and parameter count.
pub fn inspect(args: InspectArgs, out: &Output) -> CliResult<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let params = count_parameters(&ckpt.config).map_err(CliError::invalid)?;
    if out.pretty {
        println!("layers      {}", ckpt.config.num_layers);
        println!("parameters  {params}");
        for (name, t) in &ckpt.tensors {
            println!("{name:<48} {:<5} {:?}", t.dtype.as_str(), t.shape);
        }
        return Ok(());
    }
    let tensors: serde_json::Map<String, serde_json::Value> = ckpt
        .tensors
        .iter()
        .map(|(n, t)| (n.clone(), json!({ "dtype": t.dtype, "shape": t.shape })))
        .collect();
    out.print_json(&json!({ "config": ckpt.config, "parameters": params, "tensors": tensors }))
}

#[derive(Debug, Args)]
pub struct RegistryArgs {
    /// Also write the export to this file.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Prints the language registry.
pub fn registry(args: RegistryArgs, out: &Output) -> CliResult<()> {
    let export = export_json();
    if out.pretty {
        println!("{:<4} {:<20} {:>8} {:>8} {:<5}", "code", "name", "speakers", "cc", "class");
        for l in &LANGUAGES {
            let flag = if l.conflicts_with_cc_rule() { " (differs from cc rule)" } else { "" };
            println!(
                "{:<4} {:<20} {:>8} {:>8} {:<5}{flag}",
                l.code, l.name, l.speakers_label, l.cc_ratio_label, l.resource_class
            );
        }
    } else {
        out.print_json(&export)?;
    }
    if let Some(p) = &args.output {
        write_json(p, &export)?;
    }
    Ok(())
}
