use std::path::{Path, PathBuf};

use thiserror::Error;

/// Exit status 2: bad input. Exit status 3: the cryptography refused.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Crypto(String),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Crypto(_) => 3,
            _ => 2,
        }
    }

    pub fn file(path: &Path, source: std::io::Error) -> Self {
        CliError::File {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl From<hhe_core::Error> for CliError {
    fn from(e: hhe_core::Error) -> Self {
        if e.is_crypto() {
            CliError::Crypto(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<hhe_protocol::ProtocolError> for CliError {
    fn from(e: hhe_protocol::ProtocolError) -> Self {
        if e.is_crypto() {
            CliError::Crypto(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(format!("json: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Validation(format!("csv: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
