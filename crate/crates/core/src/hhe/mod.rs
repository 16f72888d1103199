//! Hybrid homomorphic encryption: key bundle, hybrid encryption,
//! transciphering (`decomp`), linear-layer evaluation and decryption.
//!
//! Data travels under the stream cipher; only the key is HE-encrypted.
//! The server turns each cipher block into a BFV ciphertext of the
//! plaintext by evaluating the keystream homomorphically and subtracting
//! it from the (public) cipher words.

mod decomp;
mod eval;
mod plan;

use std::sync::Arc;

use crate::bfv::{
    keygen, BfvContext, BfvProfile, Ciphertext, Decryptor, Encryptor, EvaluationKey, Evaluator, HeKeys,
    PeriodicEncoder, PublicKey, SecretKey,
};
use crate::codec::{Put, Reader};
use crate::pasta::{self, CipherProfile, Nonce, SymCiphertext, SymKey};
use crate::xof::Xof;
use crate::{Error, Result};

pub use decomp::{hhe_decomp, hhe_decomp_prepared, hhe_prepare_key, PreparedKey};
pub use eval::{hhe_eval, LinearLayerCircuit, MODEL_MAGIC};
pub use plan::{check_pairing, schedule, Plan, Split};

/// Keys for one HE keyholder: `sk`, `pk`, and the evaluation key (which is
/// the only part a server ever receives).
#[derive(Clone, Debug)]
pub struct HheKeyBundle {
    pub ctx: Arc<BfvContext>,
    pub cipher: CipherProfile,
    pub keys: HeKeys,
}

impl HheKeyBundle {
    pub fn evk(&self) -> &EvaluationKey {
        &self.keys.evk
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.keys.public
    }

    pub fn secret_key(&self) -> &SecretKey {
        &self.keys.secret
    }

    pub fn encryptor(&self) -> Encryptor {
        Encryptor::new(&self.ctx, &self.keys.public)
    }

    pub fn decryptor(&self) -> Decryptor {
        Decryptor::new(&self.ctx, &self.keys.secret)
    }

    pub fn evaluator(&self) -> Evaluator {
        Evaluator::new(&self.ctx, Arc::new(self.keys.evk.clone()))
    }

    pub fn plan(&self) -> Plan {
        Plan::new(&self.ctx, &self.cipher).expect("validated at keygen")
    }
}

pub fn hhe_keygen(bfv: BfvProfile, cipher: CipherProfile, seed: &[u8; 32]) -> Result<HheKeyBundle> {
    let ctx = BfvContext::from_profile(bfv)?;
    let plan = Plan::new(&ctx, &cipher)?;
    let keys = keygen(&ctx, &plan.rotation_steps(), seed)?;
    Ok(HheKeyBundle { ctx, cipher, keys })
}

/// HE encryption of the cipher key: `[K_L ‖ K_R]` in the first `2t` slots,
/// repeated across every `2t` window of both rows.
#[derive(Clone, Debug, PartialEq)]
pub struct EncryptedSymKey {
    pub cipher: CipherProfile,
    pub ct: Ciphertext,
}

pub const SYMKEY_MAGIC: &[u8; 4] = b"HHEY";

impl EncryptedSymKey {
    /// `HHEY`, version u16, cipher profile id, then the `HHEB` ciphertext.
    pub fn to_bytes(&self, ctx: &BfvContext) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SYMKEY_MAGIC);
        out.put_u16(1);
        out.put_u8(self.cipher.id);
        out.extend(self.ct.to_bytes(ctx));
        out
    }

    pub fn from_bytes(ctx: &BfvContext, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect_magic(SYMKEY_MAGIC, 1)?;
        let cipher = CipherProfile::by_id(r.u8()?)?;
        let ct = Ciphertext::from_bytes(ctx, r.bytes(r.remaining())?)?;
        check_pairing(ctx, &cipher)?;
        Ok(Self { cipher, ct })
    }
}

/// One transciphered block: slots `[0, len)` of every `2t` window hold the
/// block's plaintext words, the rest of the window is zero.
#[derive(Clone, Debug)]
pub struct TranscipheredInput {
    pub ct: Ciphertext,
    pub nonce: Nonce,
    pub block: u64,
    pub len: usize,
}

fn derive(seed: &[u8; 32], label: &str, index: u64) -> Xof {
    Xof::new(b"HHE-ENC", &[label.as_bytes(), seed, &index.to_le_bytes()])
}

fn derive_bytes<const K: usize>(seed: &[u8; 32], label: &str, index: u64) -> [u8; K] {
    let mut out = [0u8; K];
    rand_core::RngCore::fill_bytes(&mut derive(seed, label, index), &mut out);
    out
}

/// Encrypt several vectors under one fresh cipher key (nonce per vector).
pub fn hhe_enc_many(
    enc: &Encryptor,
    cipher: &CipherProfile,
    xs: &[Vec<u64>],
    seed: &[u8; 32],
) -> Result<(Vec<SymCiphertext>, EncryptedSymKey)> {
    check_pairing(enc.context(), cipher)?;
    let key = pasta::ske_gen(cipher, &derive_bytes(seed, "sym-key", 0))?;
    hhe_enc_with_key(enc, &key, xs, seed)
}

/// As [`hhe_enc_many`], with a caller-held key.
pub fn hhe_enc_with_key(
    enc: &Encryptor,
    key: &SymKey,
    xs: &[Vec<u64>],
    seed: &[u8; 32],
) -> Result<(Vec<SymCiphertext>, EncryptedSymKey)> {
    let ctx = enc.context();
    let cipher = key.profile();
    check_pairing(ctx, cipher)?;
    if xs.is_empty() || xs.iter().any(|x| x.is_empty()) {
        return Err(Error::Shape("nothing to encrypt".into()));
    }
    let cts = xs
        .iter()
        .enumerate()
        .map(|(i, x)| pasta::ske_enc(key, &derive_bytes(seed, "nonce", i as u64), x))
        .collect::<Result<Vec<_>>>()?;
    let pe = PeriodicEncoder::new(ctx, cipher.key_len())?;
    let ct = enc.encrypt(&pe.encode(key.words())?, &mut derive(seed, "he-enc", 0))?;
    Ok((cts, EncryptedSymKey { cipher: *cipher, ct }))
}

pub fn hhe_enc(
    enc: &Encryptor,
    cipher: &CipherProfile,
    x: &[u64],
    seed: &[u8; 32],
) -> Result<(SymCiphertext, EncryptedSymKey)> {
    let (mut cts, ck) = hhe_enc_many(enc, cipher, &[x.to_vec()], seed)?;
    Ok((cts.pop().expect("one ciphertext"), ck))
}

/// Decrypt all slots; refuses ciphertexts whose measured budget is gone.
pub fn hhe_dec(dec: &Decryptor, ct: &Ciphertext) -> Result<Vec<u64>> {
    if dec.noise_budget(ct)? == 0 {
        return Err(Error::UnreliableDecrypt(format!(
            "noise budget exhausted at level {}",
            ct.level()
        )));
    }
    dec.decrypt_slots(ct)
}
