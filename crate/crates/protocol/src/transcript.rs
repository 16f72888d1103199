//! Ordered record of every envelope put on the bus, with per-edge byte
//! totals. Exported as JSON lines, one envelope per line.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::envelope::{Directory, Inbox, PartyId, PayloadType, Role};
use crate::Result;

#[derive(Clone, Debug, Serialize)]
pub struct Record {
    pub seq: usize,
    pub from: PartyId,
    pub to: PartyId,
    pub edge: String,
    #[serde(rename = "type")]
    pub kind: PayloadType,
    pub timestamp: u64,
    pub size: usize,
    #[serde(serialize_with = "hex_digest")]
    pub sha256: [u8; 32],
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub bytes: Option<Vec<u8>>,
}

fn hex_digest<S: serde::Serializer>(d: &[u8; 32], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode(d))
}

/// Unordered pair of roles, e.g. `user-csp`.
pub fn edge(a: Role, b: Role) -> String {
    let (x, y) = if a <= b { (a, b) } else { (b, a) };
    format!("{x}-{y}")
}

#[derive(Clone, Debug)]
pub struct Transcript {
    records: Vec<Record>,
    keep_bytes: bool,
}

impl Transcript {
    pub fn new(keep_bytes: bool) -> Self {
        Self {
            records: Vec::new(),
            keep_bytes,
        }
    }

    pub(crate) fn log(
        &mut self,
        from: PartyId,
        to: PartyId,
        kind: PayloadType,
        timestamp: u64,
        bytes: &[u8],
        outcome: std::result::Result<(), String>,
    ) {
        self.records.push(Record {
            seq: self.records.len(),
            from,
            to,
            edge: edge(from.role(), to.role()),
            kind,
            timestamp,
            size: bytes.len(),
            sha256: Sha256::digest(bytes).into(),
            accepted: outcome.is_ok(),
            error: outcome.err(),
            bytes: self.keep_bytes.then(|| bytes.to_vec()),
        });
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_bytes(&self) -> u64 {
        self.records.iter().map(|r| r.size as u64).sum()
    }

    pub fn edge_totals(&self) -> BTreeMap<String, u64> {
        let mut m = BTreeMap::new();
        for r in &self.records {
            *m.entry(r.edge.clone()).or_insert(0) += r.size as u64;
        }
        m
    }

    /// Bytes of accepted envelopes of one type.
    pub fn bytes_of(&self, kind: PayloadType) -> u64 {
        self.records
            .iter()
            .filter(|r| r.accepted && r.kind == kind)
            .map(|r| r.size as u64)
            .sum()
    }

    /// One JSON object per envelope; with `with_bytes`, the full envelope
    /// in hex under `envelope`.
    pub fn to_json_lines(&self, with_bytes: bool) -> String {
        let mut out = String::new();
        for r in &self.records {
            let mut v = serde_json::to_value(r).expect("plain data");
            if with_bytes {
                if let Some(b) = &r.bytes {
                    v["envelope"] = serde_json::Value::String(hex::encode(b));
                }
            }
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }

    /// Re-verify every accepted envelope in order through fresh inboxes.
    /// Needs the bytes to have been kept.
    pub fn replay(&self, dir: &Directory) -> Result<usize> {
        let mut inboxes: BTreeMap<PartyId, Inbox> = BTreeMap::new();
        let mut n = 0;
        for r in self.records.iter().filter(|r| r.accepted) {
            let bytes = r
                .bytes
                .as_ref()
                .ok_or_else(|| crate::ProtocolError::NotFound(format!("bytes of envelope {}", r.seq)))?;
            inboxes.entry(r.to).or_default().accept(dir, bytes)?;
            n += 1;
        }
        Ok(n)
    }
}
