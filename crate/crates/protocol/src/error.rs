use thiserror::Error;

use crate::PartyId;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Core(#[from] hhe_core::Error),
    #[error("malformed envelope: {0}")]
    Envelope(String),
    #[error("signature from {0} does not verify")]
    BadSignature(PartyId),
    #[error("unknown sender {0}")]
    UnknownSender(PartyId),
    #[error("stale timestamp {got} from {sender} (last accepted {last})")]
    Replay { sender: PartyId, got: u64, last: u64 },
    #[error("{0} cannot receive {1}")]
    Unexpected(PartyId, &'static str),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("sealed result failed to open")]
    Integrity,
    #[error("setup: {0}")]
    Setup(String),
}

impl ProtocolError {
    /// Authentication and cryptographic failures, as opposed to bad input.
    pub fn is_crypto(&self) -> bool {
        match self {
            ProtocolError::Core(e) => e.is_crypto(),
            ProtocolError::BadSignature(_) | ProtocolError::Replay { .. } | ProtocolError::Integrity => true,
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, ProtocolError>;
