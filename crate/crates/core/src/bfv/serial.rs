//! Binary formats.
//!
//! `HHEB` objects: magic, version u16, kind u8, params hash (32 bytes),
//! then a kind-specific body. Polynomials are a domain byte, a limb count
//! byte and `limbs * N` little-endian u64 words, limb-major.
//!
//! `HHEK` (evaluation key): magic, version u16, params hash, relin key,
//! declared steps, then one key per Galois element. Key-switch keys carry
//! their 32-byte `a` seed and the `b` polynomials only.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::ciphertext::Ciphertext;
use super::encoding::Plaintext;
use super::keys::{EvaluationKey, GaloisKeys, KeySwitchKey, PublicKey, RelinKey, SecretKey};
use super::params::BfvContext;
use crate::codec::{Put, Reader};
use crate::ring::{Domain, RnsBasis, RnsPoly};
use crate::{Error, Result};

pub const BFV_MAGIC: &[u8; 4] = b"HHEB";
pub const EVK_MAGIC: &[u8; 4] = b"HHEK";
pub const FORMAT_VERSION: u16 = 1;

/// Size of the `HHEB` header.
pub const HEADER_LEN: usize = 4 + 2 + 1 + 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    Ciphertext = 1,
    Plaintext = 2,
    PublicKey = 3,
    SecretKey = 4,
}

fn header(out: &mut Vec<u8>, ctx: &BfvContext, kind: Kind) {
    out.extend_from_slice(BFV_MAGIC);
    out.put_u16(FORMAT_VERSION);
    out.put_u8(kind as u8);
    out.extend_from_slice(&ctx.params_hash());
}

fn check_hash(r: &mut Reader, ctx: &BfvContext) -> Result<()> {
    if r.array::<32>()? != ctx.params_hash() {
        return Err(Error::Format("parameter hash does not match this context".into()));
    }
    Ok(())
}

fn open<'a>(ctx: &BfvContext, bytes: &'a [u8], kind: Kind) -> Result<Reader<'a>> {
    let mut r = Reader::new(bytes);
    r.expect_magic(BFV_MAGIC, FORMAT_VERSION)?;
    let k = r.u8()?;
    if k != kind as u8 {
        return Err(Error::Format(format!("object kind {k}, expected {:?}", kind)));
    }
    check_hash(&mut r, ctx)?;
    Ok(r)
}

fn put_poly(out: &mut Vec<u8>, p: &RnsPoly) {
    out.put_u8(match p.domain() {
        Domain::Coefficient => 0,
        Domain::Ntt => 1,
    });
    out.put_u8(p.num_limbs() as u8);
    out.put_words(p.data());
}

fn get_poly(r: &mut Reader, basis: &Arc<RnsBasis>) -> Result<RnsPoly> {
    let domain = match r.u8()? {
        0 => Domain::Coefficient,
        1 => Domain::Ntt,
        d => return Err(Error::Format(format!("bad domain tag {d}"))),
    };
    let limbs = r.u8()? as usize;
    if limbs != basis.len() {
        return Err(Error::Format(format!("{limbs} limbs, expected {}", basis.len())));
    }
    let n = basis.degree();
    let mut data = Vec::with_capacity(limbs * n);
    for i in 0..limbs {
        data.extend(r.words_below(n, basis.modulus(i).value())?);
    }
    Ok(RnsPoly::from_raw(basis, data, domain))
}

impl Ciphertext {
    /// Body: component count u8, level u8, noise estimate f64, components.
    pub fn to_bytes(&self, ctx: &BfvContext) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len(ctx));
        header(&mut out, ctx, Kind::Ciphertext);
        out.put_u8(self.polys.len() as u8);
        out.put_u8(self.level() as u8);
        out.put_f64(self.noise);
        for p in &self.polys {
            put_poly(&mut out, p);
        }
        out
    }

    pub fn serialized_len(&self, ctx: &BfvContext) -> usize {
        HEADER_LEN + 2 + 8 + self.polys.len() * (2 + 8 * self.level() * ctx.degree())
    }

    pub fn from_bytes(ctx: &BfvContext, bytes: &[u8]) -> Result<Self> {
        let mut r = open(ctx, bytes, Kind::Ciphertext)?;
        let count = r.u8()? as usize;
        if !(2..=3).contains(&count) {
            return Err(Error::Format(format!("{count} ciphertext components")));
        }
        let level = r.u8()? as usize;
        let noise = r.f64()?;
        let lc = ctx
            .level(level)
            .map_err(|_| Error::Format(format!("ciphertext level {level} outside the chain")))?;
        let polys = (0..count)
            .map(|_| get_poly(&mut r, &lc.q))
            .collect::<Result<Vec<_>>>()?;
        if polys.iter().any(|p| p.domain() != Domain::Ntt) {
            return Err(Error::Format("ciphertext components must be in the NTT domain".into()));
        }
        r.finish()?;
        Ok(Self { polys, noise })
    }
}

impl Plaintext {
    pub fn to_bytes(&self, ctx: &BfvContext) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.coeffs.len());
        header(&mut out, ctx, Kind::Plaintext);
        out.put_words(&self.coeffs);
        out
    }

    pub fn from_bytes(ctx: &BfvContext, bytes: &[u8]) -> Result<Self> {
        let mut r = open(ctx, bytes, Kind::Plaintext)?;
        let coeffs = r.words_below(ctx.degree(), ctx.plain().p())?;
        r.finish()?;
        Ok(Self { coeffs })
    }
}

impl PublicKey {
    pub fn to_bytes(&self, ctx: &BfvContext) -> Vec<u8> {
        let mut out = Vec::new();
        header(&mut out, ctx, Kind::PublicKey);
        put_poly(&mut out, &self.b);
        put_poly(&mut out, &self.a);
        out
    }

    pub fn from_bytes(ctx: &BfvContext, bytes: &[u8]) -> Result<Self> {
        let mut r = open(ctx, bytes, Kind::PublicKey)?;
        let q = &ctx.top().q;
        let b = get_poly(&mut r, q)?;
        let a = get_poly(&mut r, q)?;
        r.finish()?;
        Ok(Self { b, a })
    }
}

impl SecretKey {
    /// Ternary coefficients as one signed byte each.
    pub fn to_bytes(&self, ctx: &BfvContext) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.coeffs.len());
        header(&mut out, ctx, Kind::SecretKey);
        out.extend(self.coeffs.iter().map(|&c| c as u8));
        out
    }

    pub fn from_bytes(ctx: &BfvContext, bytes: &[u8]) -> Result<Self> {
        let mut r = open(ctx, bytes, Kind::SecretKey)?;
        let coeffs: Vec<i8> = r.bytes(ctx.degree())?.iter().map(|&b| b as i8).collect();
        r.finish()?;
        SecretKey::from_coeffs(ctx, coeffs)
    }
}

fn put_ksk(out: &mut Vec<u8>, k: &KeySwitchKey) {
    out.extend_from_slice(&k.a_seed);
    out.put_u8(k.b.len() as u8);
    for p in &k.b {
        put_poly(out, p);
    }
}

fn get_ksk(r: &mut Reader, ctx: &BfvContext) -> Result<KeySwitchKey> {
    let a_seed = r.array::<32>()?;
    let digits = r.u8()? as usize;
    if digits != ctx.max_level() {
        return Err(Error::Format(format!("{digits} key-switch digits, expected {}", ctx.max_level())));
    }
    let b = (0..digits)
        .map(|_| get_poly(r, ctx.key_basis()))
        .collect::<Result<Vec<_>>>()?;
    Ok(KeySwitchKey::from_parts(ctx, a_seed, b))
}

impl EvaluationKey {
    pub fn to_bytes(&self, ctx: &BfvContext) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(EVK_MAGIC);
        out.put_u16(FORMAT_VERSION);
        out.extend_from_slice(&ctx.params_hash());
        put_ksk(&mut out, &self.relin.0);
        out.put_u32(self.galois.steps.len() as u32);
        for &s in &self.galois.steps {
            out.put_i64(s);
        }
        out.put_u32(self.galois.keys.len() as u32);
        for (&g, k) in &self.galois.keys {
            out.put_u64(g);
            put_ksk(&mut out, k);
        }
        out
    }

    pub fn from_bytes(ctx: &BfvContext, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect_magic(EVK_MAGIC, FORMAT_VERSION)?;
        check_hash(&mut r, ctx)?;
        let relin = RelinKey(get_ksk(&mut r, ctx)?);
        let nsteps = r.u32()? as usize;
        let mut steps = BTreeSet::new();
        for _ in 0..nsteps.min(ctx.degree()) {
            steps.insert(r.i64()?);
        }
        if steps.len() != nsteps {
            return Err(Error::Format("duplicate or excess rotation steps".into()));
        }
        let nkeys = r.u32()? as usize;
        let mut keys = BTreeMap::new();
        for _ in 0..nkeys.min(ctx.degree()) {
            let g = r.u64()?;
            keys.insert(g, get_ksk(&mut r, ctx)?);
        }
        if keys.len() != nkeys {
            return Err(Error::Format("duplicate or excess Galois keys".into()));
        }
        for &s in &steps {
            if !keys.contains_key(&ctx.galois_element(s)) {
                return Err(Error::Format(format!("declared step {s} has no key")));
            }
        }
        r.finish()?;
        Ok(Self {
            relin,
            galois: GaloisKeys { steps, keys },
        })
    }
}
