//! `HHES`: magic, version u16, profile id u8, nonce (16 bytes), word
//! count u64, then the words as little-endian u64.

use super::{CipherProfile, SymCiphertext};
use crate::codec::{Put, Reader};
use crate::{Error, Result};

pub const SYM_MAGIC: &[u8; 4] = b"HHES";
pub const SYM_VERSION: u16 = 1;
pub const SYM_HEADER_LEN: usize = 4 + 2 + 1 + 16 + 8;

impl SymCiphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(SYM_MAGIC);
        out.put_u16(SYM_VERSION);
        out.put_u8(self.profile.id);
        out.extend_from_slice(&self.nonce);
        out.put_u64(self.words.len() as u64);
        out.put_words(&self.words);
        out
    }

    pub fn serialized_len(&self) -> usize {
        SYM_HEADER_LEN + 8 * self.words.len()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect_magic(SYM_MAGIC, SYM_VERSION)?;
        let profile = CipherProfile::by_id(r.u8()?)?;
        let nonce = r.array::<16>()?;
        let n = r.u64()?;
        if n.saturating_mul(8) != r.remaining() as u64 {
            return Err(Error::Format(format!(
                "header declares {n} words, body holds {} bytes",
                r.remaining()
            )));
        }
        let words = r.words_below(n as usize, profile.p)?;
        r.finish()?;
        Ok(Self { profile, nonce, words })
    }
}
