//! File helpers and the per-run manifest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use babelkit_core::corpus::{read_documents, SkippedLine};
use babelkit_core::Document;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(CliError::io)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let reader = open(path)?;
    serde_json::from_reader(reader)
        .with_context(|| format!("invalid JSON in {}", path.display()))
        .map_err(CliError::invalid)
}

/// Writes through a temporary file in the destination directory, so the
/// destination is either the old file or the complete new one.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let run = || -> anyhow::Result<()> {
        let tmp = tempfile::NamedTempFile::new_in(dir)?;
        let mut w = BufWriter::new(tmp);
        fill(&mut w)?;
        w.flush()?;
        let tmp = w.into_inner().map_err(|e| e.into_error())?;
        tmp.persist(path)?;
        Ok(())
    };
    run().with_context(|| format!("cannot write {}", path.display())).map_err(CliError::io)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

pub fn write_docs(path: &Path, docs: &[Document]) -> CliResult<()> {
    write_atomic(path, |w| babelkit_core::write_jsonl(w, docs))
}

/// `out` with `suffix` appended to its file name.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    out.with_file_name(name)
}

/// Reads a corpus, logging each skipped line to stderr.
pub fn read_corpus(path: &Path, strict: bool) -> CliResult<(Vec<Document>, Vec<SkippedLine>)> {
    let parsed = read_documents(open(path)?, strict).map_err(|e| CliError::from(e).context(format!("{}", path.display())))?;
    for s in &parsed.skipped {
        eprintln!("{}: skipped line {}: {}", path.display(), s.line, s.reason);
    }
    Ok((parsed.records, parsed.skipped))
}

/// Record of one invocation, written next to its primary output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub tool_version: &'static str,
    pub parameters: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub counts: Value,
    pub duration_secs: f64,
}

pub struct Run {
    pub subcommand: &'static str,
    started: Instant,
}

impl Run {
    pub fn start(subcommand: &'static str) -> Self {
        Run { subcommand, started: Instant::now() }
    }

    /// Writes the manifest to `path`, or to stderr when there is no file
    /// output to sit next to.
    #[allow(clippy::too_many_arguments)]
    pub fn finish(
        self,
        path: Option<&Path>,
        parameters: Value,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
        seed: Option<u64>,
        counts: Value,
    ) -> CliResult<()> {
        let manifest = RunManifest {
            subcommand: self.subcommand,
            tool_version: env!("CARGO_PKG_VERSION"),
            parameters,
            inputs,
            outputs,
            seed,
            threads: rayon::current_num_threads(),
            counts,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        match path {
            Some(p) => write_json(p, &manifest),
            None => {
                eprintln!("{}", serde_json::to_string(&manifest).map_err(CliError::io)?);
                Ok(())
            }
        }
    }
}
