use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Solver(#[from] obm_stopping::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("config {path}, line {line}: {msg}")]
    Config {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VERIFICATION: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

impl CliError {
    pub fn usage(e: obm_stopping::Error) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(obm_stopping::Error::Domain(_)) => EXIT_USAGE,
            CliError::Solver(_) => EXIT_NUMERIC,
            CliError::Usage(_) | CliError::Io { .. } | CliError::Config { .. } => EXIT_USAGE,
        }
    }
}
