mod cmd;
mod error;
mod io;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Layer-extension surgery and multilingual corpus curation.
///
/// Exit codes: 0 success, 1 I/O error, 2 invalid input, 3 verification
/// failure.
#[derive(Debug, Parser)]
#[command(name = "babelkit", version)]
struct Cli {
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true, env = "BABELKIT_THREADS")]
    threads: Option<usize>,
    /// Human-readable tables instead of JSON on stdout.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Insert layers into a checkpoint.
    Extend(cmd::extend::ExtendArgs),
    /// Compare a checkpoint with its extension, or run the ablation grid.
    Verify(cmd::verify::VerifyArgs),
    /// Apply length/digit rules and an optional quality-score gate.
    Clean(cmd::corpus::CleanArgs),
    /// Remove exact and near-duplicate documents.
    Dedup(cmd::corpus::DedupArgs),
    /// Count available tokens per language and category.
    Stats(cmd::corpus::StatsArgs),
    /// Plan stage-1 or stage-2 token allocations.
    Mix(cmd::mix::MixArgs),
    /// Print the language registry.
    Registry(cmd::misc::RegistryArgs),
    /// Write a seeded random checkpoint.
    Toy(cmd::misc::ToyArgs),
    /// Show a checkpoint's config and tensors.
    Inspect(cmd::misc::InspectArgs),
}

pub struct Output {
    pub pretty: bool,
}

impl Output {
    pub fn print_json<T: Serialize + ?Sized>(&self, value: &T) -> CliResult<()> {
        let text = serde_json::to_string(value).map_err(CliError::io)?;
        println!("{text}");
        Ok(())
    }

    /// Counts as JSON, or one `name value` line each under --pretty.
    pub fn summary<K: Serialize + std::fmt::Display, V: Serialize + std::fmt::Display>(
        &self,
        counts: &std::collections::BTreeMap<K, V>,
    ) -> CliResult<()> {
        if self.pretty {
            for (k, v) in counts {
                println!("{k:<16} {v}");
            }
            Ok(())
        } else {
            self.print_json(counts)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::invalid(anyhow::anyhow!("thread count must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(CliError::io)?;
    }
    let out = Output { pretty: cli.pretty };
    match cli.command {
        Command::Extend(a) => cmd::extend::run(a, &out),
        Command::Verify(a) => cmd::verify::run(a, &out),
        Command::Clean(a) => cmd::corpus::clean(a, &out),
        Command::Dedup(a) => cmd::corpus::dedup_cmd(a, &out),
        Command::Stats(a) => cmd::corpus::stats(a, &out),
        Command::Mix(a) => cmd::mix::run(a, &out),
        Command::Registry(a) => cmd::misc::registry(a, &out),
        Command::Toy(a) => cmd::misc::toy(a, &out),
        Command::Inspect(a) => cmd::misc::inspect(a, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
