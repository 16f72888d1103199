//! SHAKE128-based deterministic expander with domain separation.

use rand_core::{impls, CryptoRng, Error as RandError, RngCore};
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::{Shake128, Shake128Reader};

const BUF: usize = 168;

/// A SHAKE128 stream keyed by a domain tag and a list of length-prefixed parts.
pub struct Xof {
    reader: Shake128Reader,
    buf: [u8; BUF],
    pos: usize,
}

impl Xof {
    pub fn new(tag: &[u8], parts: &[&[u8]]) -> Self {
        let mut h = Shake128::default();
        h.update(&(tag.len() as u32).to_le_bytes());
        h.update(tag);
        for p in parts {
            h.update(&(p.len() as u64).to_le_bytes());
            h.update(p);
        }
        Self {
            reader: h.finalize_xof(),
            buf: [0; BUF],
            pos: BUF,
        }
    }

    /// Convenience for a seed plus a label, as used by key and noise sampling.
    pub fn from_seed(seed: &[u8; 32], label: &str) -> Self {
        Self::new(b"HHE-SEED", &[seed, label.as_bytes()])
    }

    #[inline]
    fn byte(&mut self) -> u8 {
        if self.pos == BUF {
            self.reader.read(&mut self.buf);
            self.pos = 0;
        }
        let b = self.buf[self.pos];
        self.pos += 1;
        b
    }

    /// Unsigned integer assembled from `bytes` little-endian bytes.
    pub fn read_le(&mut self, bytes: usize) -> u64 {
        let mut v = 0u64;
        for i in 0..bytes {
            v |= (self.byte() as u64) << (8 * i);
        }
        v
    }

    /// Uniform value in `[0, bound)` by masked rejection.
    pub fn uniform_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        let bits = 64 - (bound - 1).leading_zeros();
        let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        loop {
            let v = self.next_u64() & mask;
            if v < bound {
                return v;
            }
        }
    }
}

impl RngCore for Xof {
    fn next_u32(&mut self) -> u32 {
        self.read_le(4) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.read_le(8)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), RandError> {
        self.fill_bytes(dest);
        Ok(())
    }
}

impl CryptoRng for Xof {}
