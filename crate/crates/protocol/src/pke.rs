//! Public-key encryption for results leaving the TEE: ephemeral X25519,
//! HKDF-SHA256, ChaCha20-Poly1305 (a DHIES-style hybrid; the AEAD tag makes
//! any modified ciphertext fail to open).
//!
//! Sealed layout: ephemeral public key (32 bytes), then the AEAD output.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use hkdf::Hkdf;
use rand_core::{CryptoRng, RngCore};
use sha2::Sha256;
use x25519_dalek::{PublicKey, StaticSecret};

use crate::{ProtocolError, Result};

pub const PUBLIC_LEN: usize = 32;
pub const OVERHEAD: usize = PUBLIC_LEN + 16;

pub struct PkeSecret(StaticSecret);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PkePublic(pub [u8; PUBLIC_LEN]);

impl PkeSecret {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self(StaticSecret::from(seed))
    }

    pub fn public(&self) -> PkePublic {
        PkePublic(PublicKey::from(&self.0).to_bytes())
    }

    pub(crate) fn secret_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn open(&self, sealed: &[u8], aad: &[u8]) -> Result<Vec<u8>> {
        if sealed.len() < OVERHEAD {
            return Err(ProtocolError::Integrity);
        }
        let eph: [u8; PUBLIC_LEN] = sealed[..PUBLIC_LEN].try_into().expect("32 bytes");
        let shared = self.0.diffie_hellman(&PublicKey::from(eph));
        let cipher = aead(shared.as_bytes(), &eph, &self.public().0);
        cipher
            .decrypt(Nonce::from_slice(&[0; 12]), Payload { msg: &sealed[PUBLIC_LEN..], aad })
            .map_err(|_| ProtocolError::Integrity)
    }
}

// fresh key per message, so a fixed nonce is safe
fn aead(shared: &[u8; 32], eph: &[u8; 32], recipient: &[u8; 32]) -> ChaCha20Poly1305 {
    let mut info = b"HHE-PKE v1".to_vec();
    info.extend_from_slice(eph);
    info.extend_from_slice(recipient);
    let mut key = [0u8; 32];
    Hkdf::<Sha256>::new(None, shared)
        .expand(&info, &mut key)
        .expect("32 bytes is a valid HKDF length");
    ChaCha20Poly1305::new(Key::from_slice(&key))
}

pub fn seal<R: RngCore + CryptoRng>(to: &PkePublic, msg: &[u8], aad: &[u8], rng: &mut R) -> Vec<u8> {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    let eph = StaticSecret::from(seed);
    let eph_pub = PublicKey::from(&eph).to_bytes();
    let shared = eph.diffie_hellman(&PublicKey::from(to.0));
    let body = aead(shared.as_bytes(), &eph_pub, &to.0)
        .encrypt(Nonce::from_slice(&[0; 12]), Payload { msg, aad })
        .expect("in-memory encryption");
    let mut out = eph_pub.to_vec();
    out.extend(body);
    out
}
