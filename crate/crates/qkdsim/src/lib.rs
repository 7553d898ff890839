//! Library behind the `qkdsim` binary: run profiles, presets and report files.

pub mod profile;
pub mod run;

use std::path::PathBuf;

/// Exit status for a clean run.
pub const EXIT_OK: u8 = 0;
/// Exit status when a Monte Carlo validation ledger has a failing row.
pub const EXIT_LEDGER_FAILURE: u8 = 2;
/// Bad command line, profile or parameter value.
pub const EXIT_USAGE: u8 = 64;
/// An output file could not be created or written.
pub const EXIT_CANT_CREATE: u8 = 73;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Model(#[from] dpsmdi::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Model(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_CANT_CREATE,
        }
    }
}
