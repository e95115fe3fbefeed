use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit statuses.
pub mod exit {
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const DOMAIN: i32 = 4;
    pub const CONVERGENCE: i32 = 5;
    pub const IO: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {msg}")]
    Json { path: PathBuf, msg: String },

    #[error("{0}")]
    Domain(String),

    #[error("{0}")]
    Convergence(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Json { .. } => exit::PARSE,
            CliError::Domain(_) => exit::DOMAIN,
            CliError::Convergence(_) => exit::CONVERGENCE,
            CliError::Io { .. } => exit::IO,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<ggn::Error> for CliError {
    fn from(e: ggn::Error) -> Self {
        match e {
            ggn::Error::NonConvergence { .. } | ggn::Error::Quadrature { .. } => {
                CliError::Convergence(e.to_string())
            }
            _ => CliError::Domain(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
