use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("level mismatch: {0}")]
    Level(String),
    #[error("multiplicative depth exhausted: {0}")]
    DepthExhausted(String),
    #[error("no rotation key for step {0}")]
    MissingKey(i64),
    #[error("format error: {0}")]
    Format(String),
    #[error("decryption unreliable: {0}")]
    UnreliableDecrypt(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("balance error: {0}")]
    Balance(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Failures of the cryptographic layer (as opposed to malformed input).
    pub fn is_crypto(&self) -> bool {
        matches!(
            self,
            Error::DepthExhausted(_)
                | Error::MissingKey(_)
                | Error::UnreliableDecrypt(_)
                | Error::Level(_)
                | Error::Internal(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
