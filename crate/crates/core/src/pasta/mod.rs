//! PASTA-style stream cipher over `F_p`.
//!
//! State `(L, R)` starts as the key halves. Each round applies a fresh
//! affine layer per branch, the mix `(2L + R, L + 2R)`, then an S-box:
//! the Feistel square `s_j += s_{j-1}^2` (all `j >= 1` at once, `s_0`
//! untouched) for every round but the last, which cubes every word. A
//! final affine layer and mix follow; the keystream is `L`.

mod affine;
mod serial;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::par;
use crate::ring::PrimeField;
use crate::xof::Xof;
use crate::{Error, Result};

pub use affine::{gen_affine, is_invertible, Affine, MAX_RETRIES};
pub use serial::{SYM_HEADER_LEN, SYM_MAGIC, SYM_VERSION};

pub type Nonce = [u8; 16];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CipherProfile {
    pub name: &'static str,
    /// Wire id; 0 marks ad-hoc profiles that cannot be deserialized.
    pub id: u8,
    pub t: usize,
    pub rounds: usize,
    pub p: u64,
}

pub const TEST: CipherProfile = CipherProfile {
    name: "test",
    id: 1,
    t: 32,
    rounds: 3,
    p: 65537,
};

pub const PASTA3_LIKE: CipherProfile = CipherProfile {
    name: "pasta3-like",
    id: 2,
    t: 128,
    rounds: 3,
    p: 65537,
};

pub const CIPHER_PROFILES: [CipherProfile; 2] = [TEST, PASTA3_LIKE];

impl CipherProfile {
    pub fn by_name(name: &str) -> Result<Self> {
        CIPHER_PROFILES
            .iter()
            .find(|p| p.name == name)
            .copied()
            .ok_or_else(|| Error::Parameter(format!("unknown cipher profile {name:?}")))
    }

    pub fn by_id(id: u8) -> Result<Self> {
        CIPHER_PROFILES
            .iter()
            .find(|p| p.id == id && id != 0)
            .copied()
            .ok_or_else(|| Error::Format(format!("unknown cipher profile id {id}")))
    }

    pub fn custom(name: &'static str, t: usize, rounds: usize) -> Self {
        Self {
            name,
            id: 0,
            t,
            rounds,
            p: 65537,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t < 2 || self.rounds < 2 {
            return Err(Error::Parameter(format!(
                "cipher profile {} needs t >= 2 and rounds >= 2 (got t={}, rounds={})",
                self.name, self.t, self.rounds
            )));
        }
        PrimeField::new(self.p)?;
        Ok(())
    }

    pub fn field(&self) -> PrimeField {
        PrimeField::new(self.p).expect("validated profile")
    }

    /// Key length in words.
    pub fn key_len(&self) -> usize {
        2 * self.t
    }

    /// Number of affine layers per block.
    pub fn layers(&self) -> usize {
        self.rounds + 1
    }
}

/// Uniform word in `[0, p)` from the smallest covering bit width.
pub(crate) fn field_word(x: &mut Xof, p: u64) -> u64 {
    let bits = 64 - (p - 1).leading_zeros();
    let bytes = bits.div_ceil(8) as usize;
    let mask = (1u64 << bits) - 1;
    loop {
        let v = x.read_le(bytes) & mask;
        if v < p {
            return v;
        }
    }
}

/// `2t` words: left half `K_L`, right half `K_R`.
#[derive(Clone, PartialEq, Eq)]
pub struct SymKey {
    profile: CipherProfile,
    words: Vec<u64>,
}

impl fmt::Debug for SymKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymKey({}, ..)", self.profile.name)
    }
}

impl SymKey {
    pub fn from_words(profile: CipherProfile, words: Vec<u64>) -> Result<Self> {
        profile.validate()?;
        if words.len() != profile.key_len() {
            return Err(Error::Shape(format!(
                "{} key words, profile {} needs {}",
                words.len(),
                profile.name,
                profile.key_len()
            )));
        }
        if let Some(w) = words.iter().find(|&&w| w >= profile.p) {
            return Err(Error::Domain(format!("key word {w} >= p")));
        }
        Ok(Self { profile, words })
    }

    pub fn profile(&self) -> &CipherProfile {
        &self.profile
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

pub fn ske_gen(profile: &CipherProfile, seed: &[u8; 32]) -> Result<SymKey> {
    profile.validate()?;
    let mut x = Xof::new(b"PERV-KEY", &[profile.name.as_bytes(), seed]);
    let words = (0..profile.key_len()).map(|_| field_word(&mut x, profile.p)).collect();
    Ok(SymKey {
        profile: *profile,
        words,
    })
}

/// All affine layers of one block, `[layer][branch]`.
pub fn block_layers(profile: &CipherProfile, nonce: &Nonce, block: u64) -> Result<Vec<[Affine; 2]>> {
    (0..profile.layers())
        .map(|r| {
            Ok([
                gen_affine(profile, nonce, block, r as u32, 0)?,
                gen_affine(profile, nonce, block, r as u32, 1)?,
            ])
        })
        .collect()
}

fn mix(l: &mut [u64], r: &mut [u64], p: u64) {
    for (a, b) in l.iter_mut().zip(r.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = (2 * x + y) % p;
        *b = (x + 2 * y) % p;
    }
}

fn feistel(s: &mut [u64], p: u64) {
    for j in (1..s.len()).rev() {
        s[j] = (s[j] + s[j - 1] * s[j - 1]) % p;
    }
}

fn cube(s: &mut [u64], p: u64) {
    for v in s {
        *v = *v * *v % p * *v % p;
    }
}

/// Keystream from precomputed layers.
pub fn keystream_with(key: &SymKey, layers: &[[Affine; 2]]) -> Vec<u64> {
    let prof = &key.profile;
    let (p, t) = (prof.p, prof.t);
    let mut l = key.words[..t].to_vec();
    let mut r = key.words[t..].to_vec();
    for (i, [a, b]) in layers.iter().enumerate() {
        l = a.apply(&l, p);
        r = b.apply(&r, p);
        mix(&mut l, &mut r, p);
        if i + 1 < prof.rounds {
            feistel(&mut l, p);
            feistel(&mut r, p);
        } else if i + 1 == prof.rounds {
            cube(&mut l, p);
            cube(&mut r, p);
        }
    }
    l
}

pub fn keystream(key: &SymKey, nonce: &Nonce, block: u64) -> Result<Vec<u64>> {
    let layers = block_layers(&key.profile, nonce, block)?;
    Ok(keystream_with(key, &layers))
}

/// Additive stream ciphertext: `words[i] = x[i] + z[i] mod p`, block `j`
/// covering `x[j t .. (j + 1) t]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymCiphertext {
    pub profile: CipherProfile,
    pub nonce: Nonce,
    pub words: Vec<u64>,
}

impl SymCiphertext {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.words.len().div_ceil(self.profile.t)
    }

    pub fn block(&self, j: usize) -> &[u64] {
        let t = self.profile.t;
        &self.words[j * t..((j + 1) * t).min(self.words.len())]
    }
}

fn apply_stream(key: &SymKey, nonce: &Nonce, x: &[u64], sign: bool) -> Result<Vec<u64>> {
    let prof = key.profile;
    let p = prof.p;
    if let Some(w) = x.iter().find(|&&w| w >= p) {
        return Err(Error::Domain(format!("word {w} >= p = {p}")));
    }
    let jobs: Vec<(u64, &[u64])> = x.chunks(prof.t).enumerate().map(|(j, c)| (j as u64, c)).collect();
    let blocks = par::map(jobs, |(j, chunk)| {
        let z = keystream(key, nonce, j)?;
        Ok::<_, Error>(chunk
            .iter()
            .zip(z)
            .map(|(&v, z)| if sign { (v + z) % p } else { (v + p - z) % p })
            .collect::<Vec<u64>>())
    });
    let mut out = Vec::with_capacity(x.len());
    for b in blocks {
        out.extend(b?);
    }
    Ok(out)
}

pub fn ske_enc(key: &SymKey, nonce: &Nonce, x: &[u64]) -> Result<SymCiphertext> {
    Ok(SymCiphertext {
        profile: key.profile,
        nonce: *nonce,
        words: apply_stream(key, nonce, x, true)?,
    })
}

pub fn ske_dec(key: &SymKey, c: &SymCiphertext) -> Result<Vec<u64>> {
    if c.profile != key.profile {
        return Err(Error::Parameter(format!(
            "ciphertext profile {} does not match key profile {}",
            c.profile.name, key.profile.name
        )));
    }
    apply_stream(key, &c.nonce, &c.words, false)
}
