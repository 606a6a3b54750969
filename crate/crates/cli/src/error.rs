use std::fmt;
use std::process::ExitCode;

use babelkit_core::{CheckpointError, CorpusError, DedupError, MixtureError, ModelError, SurgeryError};

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Io = 1,
    Validation = 2,
    Verification = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(error: impl Into<anyhow::Error>) -> Self {
        CliError { kind: Kind::Io, error: error.into() }
    }

    pub fn invalid(error: impl Into<anyhow::Error>) -> Self {
        CliError { kind: Kind::Validation, error: error.into() }
    }

    pub fn verification(msg: impl fmt::Display) -> Self {
        CliError { kind: Kind::Verification, error: anyhow::anyhow!("{msg}") }
    }

    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        CliError { kind: self.kind, error: self.error.context(ctx) }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind as u8)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // causes already quoted by the message above them are skipped
        let mut shown = String::new();
        for cause in self.error.chain() {
            let text = cause.to_string();
            if shown.contains(&text) {
                continue;
            }
            if !shown.is_empty() {
                shown.push_str(": ");
            }
            shown.push_str(&text);
        }
        f.write_str(&shown)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e)
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        if e.is_io() { CliError::io(e) } else { CliError::invalid(e) }
    }
}

impl From<SurgeryError> for CliError {
    fn from(e: SurgeryError) -> Self {
        if e.is_io() { CliError::io(e) } else { CliError::invalid(e) }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Checkpoint(c) => c.into(),
            other => CliError::invalid(other),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        if e.is_io() { CliError::io(e) } else { CliError::invalid(e) }
    }
}

impl From<DedupError> for CliError {
    fn from(e: DedupError) -> Self {
        match e {
            DedupError::Corpus(c) => c.into(),
            other => CliError::invalid(other),
        }
    }
}

impl From<MixtureError> for CliError {
    fn from(e: MixtureError) -> Self {
        CliError::invalid(e)
    }
}
