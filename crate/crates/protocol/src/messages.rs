//! Payload bodies. Integers little-endian; variable parts length-prefixed
//! with u64 unless they run to the end of the payload.

use hhe_core::bfv::{BfvContext, Ciphertext};
use hhe_core::codec::{Put, Reader};
use hhe_core::hhe::EncryptedSymKey;
use hhe_core::pasta::SymCiphertext;

use crate::{PartyId, ProtocolError, Result};

fn blob<'a>(r: &mut Reader<'a>) -> Result<&'a [u8]> {
    let n = r.u64()?;
    if n > r.remaining() as u64 {
        return Err(ProtocolError::Envelope(format!("blob of {n} bytes overruns the payload")));
    }
    Ok(r.bytes(n as usize)?)
}

fn put_blob(out: &mut Vec<u8>, b: &[u8]) {
    out.put_u64(b.len() as u64);
    out.extend_from_slice(b);
}

/// m1: symmetric ciphertexts and the HE-encrypted key they share.
pub struct Upload {
    pub user: PartyId,
    pub inputs: Vec<SymCiphertext>,
    pub key: EncryptedSymKey,
}

impl Upload {
    pub fn encode(&self, ctx: &BfvContext) -> Vec<u8> {
        let mut out = vec![self.user.0];
        out.put_u32(self.inputs.len() as u32);
        for c in &self.inputs {
            put_blob(&mut out, &c.to_bytes());
        }
        out.extend(self.key.to_bytes(ctx));
        out
    }

    pub fn decode(ctx: &BfvContext, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let user = PartyId(r.u8()?);
        let n = r.u32()? as usize;
        let mut inputs = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            inputs.push(SymCiphertext::from_bytes(blob(&mut r)?)?);
        }
        let key = EncryptedSymKey::from_bytes(ctx, r.bytes(r.remaining())?)?;
        if inputs.iter().any(|c| c.profile != key.cipher) {
            return Err(ProtocolError::Envelope("inputs and key use different cipher profiles".into()));
        }
        Ok(Self { user, inputs, key })
    }

    /// Bytes of the symmetric ciphertexts alone.
    pub fn symmetric_len(&self) -> usize {
        self.inputs.iter().map(SymCiphertext::serialized_len).sum()
    }
}

/// Which stored input a result belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InputRef {
    pub user: PartyId,
    pub index: u32,
}

impl InputRef {
    fn put(&self, out: &mut Vec<u8>) {
        out.put_u8(self.user.0);
        out.put_u32(self.index);
    }

    fn get(r: &mut Reader) -> Result<Self> {
        Ok(Self {
            user: PartyId(r.u8()?),
            index: r.u32()?,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.put(&mut out);
        out
    }
}

/// Output of the linear layer, still HE-encrypted, with the slot layout
/// needed to read the scores.
pub struct HeResult {
    pub input: InputRef,
    pub out_dim: u32,
    pub window: u32,
    pub ct: Ciphertext,
}

impl HeResult {
    pub fn encode(&self, ctx: &BfvContext) -> Vec<u8> {
        let mut out = Vec::new();
        self.input.put(&mut out);
        out.put_u32(self.out_dim);
        out.put_u32(self.window);
        out.extend(self.ct.to_bytes(ctx));
        out
    }

    pub fn decode(ctx: &BfvContext, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let input = InputRef::get(&mut r)?;
        let out_dim = r.u32()?;
        let window = r.u32()?;
        if out_dim == 0 || window == 0 || out_dim as usize * window as usize > ctx.slots() {
            return Err(ProtocolError::Envelope(format!("result layout {out_dim} x {window}")));
        }
        let ct = Ciphertext::from_bytes(ctx, r.bytes(r.remaining())?)?;
        Ok(Self {
            input,
            out_dim,
            window,
            ct,
        })
    }

    pub fn score_slots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.out_dim as usize).map(|r| r * self.window as usize)
    }
}

/// m3: scores mod `p`, sealed to the analyst.
pub struct SealedResult {
    pub input: InputRef,
    pub sealed: Vec<u8>,
}

impl SealedResult {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.input.put(&mut out);
        out.extend_from_slice(&self.sealed);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let input = InputRef::get(&mut r)?;
        Ok(Self {
            input,
            sealed: r.bytes(r.remaining())?.to_vec(),
        })
    }
}

pub fn encode_scores(scores: &[u64]) -> Vec<u8> {
    let mut out = Vec::new();
    out.put_u32(scores.len() as u32);
    out.put_words(scores);
    out
}

pub fn decode_scores(bytes: &[u8], p: u64) -> Result<Vec<u64>> {
    let mut r = Reader::new(bytes);
    let n = r.u32()? as usize;
    let s = r.words_below(n, p)?;
    r.finish()?;
    Ok(s)
}
