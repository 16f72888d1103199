//! Little-endian byte codec shared by the binary formats.

use crate::{Error, Result};

/// Append-only writer helpers on `Vec<u8>`.
pub trait Put {
    fn put_u8(&mut self, v: u8);
    fn put_u16(&mut self, v: u16);
    fn put_u32(&mut self, v: u32);
    fn put_u64(&mut self, v: u64);
    fn put_i64(&mut self, v: i64);
    fn put_f64(&mut self, v: f64);
    fn put_words(&mut self, ws: &[u64]);
}

impl Put for Vec<u8> {
    fn put_u8(&mut self, v: u8) {
        self.push(v);
    }
    fn put_u16(&mut self, v: u16) {
        self.extend_from_slice(&v.to_le_bytes());
    }
    fn put_u32(&mut self, v: u32) {
        self.extend_from_slice(&v.to_le_bytes());
    }
    fn put_u64(&mut self, v: u64) {
        self.extend_from_slice(&v.to_le_bytes());
    }
    fn put_i64(&mut self, v: i64) {
        self.extend_from_slice(&v.to_le_bytes());
    }
    fn put_f64(&mut self, v: f64) {
        self.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fn put_words(&mut self, ws: &[u64]) {
        self.reserve(ws.len() * 8);
        for w in ws {
            self.extend_from_slice(&w.to_le_bytes());
        }
    }
}

/// Bounds-checked cursor. Every short read is a format error.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format(format!(
                "truncated input: need {n} bytes at offset {}, have {}",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn array<const K: usize>(&mut self) -> Result<[u8; K]> {
        Ok(self.bytes(K)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }
    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    pub fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.array()?))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    /// `n` words, each checked `< bound`.
    pub fn words_below(&mut self, n: usize, bound: u64) -> Result<Vec<u64>> {
        let raw = self.bytes(n.checked_mul(8).ok_or_else(|| Error::Format("length overflow".into()))?)?;
        let mut out = Vec::with_capacity(n);
        for c in raw.chunks_exact(8) {
            let w = u64::from_le_bytes(c.try_into().unwrap());
            if w >= bound {
                return Err(Error::Format(format!("word {w} out of range (bound {bound})")));
            }
            out.push(w);
        }
        Ok(out)
    }

    /// Reject trailing garbage.
    pub fn finish(self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Format(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }

    /// Check a 4-byte magic and a format version.
    pub fn expect_magic(&mut self, magic: &[u8; 4], version: u16) -> Result<()> {
        let m = self.array::<4>()?;
        if &m != magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&m),
                String::from_utf8_lossy(magic)
            )));
        }
        let v = self.u16()?;
        if v != version {
            return Err(Error::Format(format!("unsupported format version {v} (this build reads {version})")));
        }
        Ok(())
    }
}
