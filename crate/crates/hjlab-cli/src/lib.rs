//! Experiment runner around the `hjlab` library: JSON configurations in,
//! CSV/JSON artifacts out, with deterministic seeding throughout. The binary
//! is a thin shell over [`commands`]; everything testable lives here.

use std::fmt;

pub mod commands;
pub mod config;
pub mod out;

/// Errors split by exit code: configuration problems exit 3, everything
/// else exits 1. Tolerance failures are not errors; commands report them
/// through their boolean outcome and the caller exits 2.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Lab(hjlab::Error),
    Io(std::io::Error),
}

pub type CResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            // A rejected precondition means the configuration asked for
            // something the solvers refuse, not that they broke.
            CliError::Lab(hjlab::Error::InvalidArgument(_)) => 3,
            CliError::Lab(_) => 1,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration: {msg}"),
            CliError::Lab(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<hjlab::Error> for CliError {
    fn from(e: hjlab::Error) -> Self {
        CliError::Lab(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
