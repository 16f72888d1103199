//! Signed envelopes.
//!
//! Wire format: `HHEM`, version u16, sender u8, timestamp u64, payload
//! type u16, payload length u64, payload, 64-byte ed25519 signature. The
//! signature covers SHA-256 of every byte before it, so sender and type
//! are bound along with timestamp and payload.

use std::collections::HashMap;
use std::fmt;

use ed25519_dalek::{Signature, Signer as _, SigningKey, VerifyingKey};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{ProtocolError, Result};

pub const MAGIC: &[u8; 4] = b"HHEM";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 1 + 8 + 2 + 8;
pub const SIGNATURE_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PartyId(pub u8);

impl PartyId {
    pub const ANALYST: PartyId = PartyId(1);
    pub const CSP: PartyId = PartyId(2);
    pub const TEE: PartyId = PartyId(3);
    const FIRST_USER: u8 = 16;

    pub fn user(n: u8) -> Result<PartyId> {
        n.checked_add(Self::FIRST_USER)
            .map(PartyId)
            .ok_or_else(|| ProtocolError::Setup(format!("user number {n} out of range")))
    }

    pub fn role(self) -> Role {
        match self {
            PartyId::ANALYST => Role::Analyst,
            PartyId::CSP => Role::Csp,
            PartyId::TEE => Role::Tee,
            _ => Role::User,
        }
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.role() {
            Role::User if self.0 >= Self::FIRST_USER => write!(f, "user{}", self.0 - Self::FIRST_USER),
            Role::User => write!(f, "party{}", self.0),
            r => write!(f, "{r}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Csp,
    Analyst,
    Tee,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::User => "user",
            Role::Csp => "csp",
            Role::Analyst => "analyst",
            Role::Tee => "tee",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayloadType {
    /// Keyholder -> CSP: evaluation key.
    EvalKey = 1,
    /// Keyholder -> user (and analyst in TEE mode): HE public key.
    PublicKey = 2,
    /// Analyst -> TEE: PKE public key for sealed results.
    PkeKey = 3,
    /// m1: user -> CSP.
    Upload = 4,
    /// m2: analyst -> CSP.
    Model = 5,
    /// CSP -> analyst (three-party) or CSP -> TEE.
    HeResult = 6,
    /// m3: TEE -> analyst.
    SealedResult = 7,
}

impl PayloadType {
    pub fn from_u16(v: u16) -> Result<Self> {
        Ok(match v {
            1 => Self::EvalKey,
            2 => Self::PublicKey,
            3 => Self::PkeKey,
            4 => Self::Upload,
            5 => Self::Model,
            6 => Self::HeResult,
            7 => Self::SealedResult,
            _ => return Err(ProtocolError::Envelope(format!("unknown payload type {v}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub sender: PartyId,
    pub timestamp: u64,
    pub kind: PayloadType,
    pub payload: Vec<u8>,
    pub signature: [u8; SIGNATURE_LEN],
}

fn signed_part(sender: PartyId, timestamp: u64, kind: PayloadType, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(sender.0);
    out.extend_from_slice(&timestamp.to_le_bytes());
    out.extend_from_slice(&(kind as u16).to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

impl Envelope {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = signed_part(self.sender, self.timestamp, self.kind, &self.payload);
        out.extend_from_slice(&self.signature);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| ProtocolError::Envelope(m);
        if bytes.len() < HEADER_LEN + SIGNATURE_LEN {
            return Err(bad(format!("{} bytes is shorter than any envelope", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(bad("bad magic".into()));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
        let version = u16_at(4);
        if version != VERSION {
            return Err(bad(format!("version {version}")));
        }
        let sender = PartyId(bytes[6]);
        let timestamp = u64_at(7);
        let kind = PayloadType::from_u16(u16_at(15))?;
        let len = u64_at(17);
        if len != (bytes.len() - HEADER_LEN - SIGNATURE_LEN) as u64 {
            return Err(bad(format!(
                "declared payload of {len} bytes, {} present",
                bytes.len() - HEADER_LEN - SIGNATURE_LEN
            )));
        }
        let end = bytes.len() - SIGNATURE_LEN;
        Ok(Self {
            sender,
            timestamp,
            kind,
            payload: bytes[HEADER_LEN..end].to_vec(),
            signature: bytes[end..].try_into().expect("64 bytes"),
        })
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(signed_part(self.sender, self.timestamp, self.kind, &self.payload)).into()
    }

    pub fn verify(&self, key: &VerifyingKey) -> Result<()> {
        key.verify_strict(&self.digest(), &Signature::from_bytes(&self.signature))
            .map_err(|_| ProtocolError::BadSignature(self.sender))
    }

    pub fn serialized_len(&self) -> usize {
        HEADER_LEN + self.payload.len() + SIGNATURE_LEN
    }
}

/// A party's signing half, with its timestamp counter.
pub struct Signer {
    id: PartyId,
    key: SigningKey,
    next: u64,
}

impl Signer {
    pub fn new(id: PartyId, seed: [u8; 32]) -> Self {
        Self {
            id,
            key: SigningKey::from_bytes(&seed),
            next: 1,
        }
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.key.verifying_key()
    }

    pub(crate) fn secret_bytes(&self) -> [u8; 32] {
        self.key.to_bytes()
    }

    pub fn seal(&mut self, kind: PayloadType, payload: Vec<u8>) -> Envelope {
        let timestamp = self.next;
        self.next += 1;
        let digest: [u8; 32] = Sha256::digest(signed_part(self.id, timestamp, kind, &payload)).into();
        Envelope {
            sender: self.id,
            timestamp,
            kind,
            payload,
            signature: self.key.sign(&digest).to_bytes(),
        }
    }
}

/// Verifying keys of every party, distributed out of band.
#[derive(Clone, Debug, Default)]
pub struct Directory {
    keys: HashMap<PartyId, VerifyingKey>,
}

impl Directory {
    pub fn insert(&mut self, id: PartyId, key: VerifyingKey) -> Result<()> {
        if self.keys.insert(id, key).is_some() {
            return Err(ProtocolError::Setup(format!("duplicate party id {id}")));
        }
        Ok(())
    }

    pub fn get(&self, id: PartyId) -> Result<&VerifyingKey> {
        self.keys.get(&id).ok_or(ProtocolError::UnknownSender(id))
    }
}

/// Receiving side: signature check, then strictly increasing timestamps
/// per sender. Nothing is recorded for a rejected envelope.
#[derive(Clone, Debug, Default)]
pub struct Inbox {
    last: HashMap<PartyId, u64>,
}

impl Inbox {
    pub fn accept(&mut self, dir: &Directory, bytes: &[u8]) -> Result<Envelope> {
        let env = Envelope::from_bytes(bytes)?;
        env.verify(dir.get(env.sender)?)?;
        let last = self.last.get(&env.sender).copied().unwrap_or(0);
        if env.timestamp <= last {
            return Err(ProtocolError::Replay {
                sender: env.sender,
                got: env.timestamp,
                last,
            });
        }
        self.last.insert(env.sender, env.timestamp);
        Ok(env)
    }
}
