//! Browser front end for the toolkit on a toy ring (N = 2048, far below
//! any security level; the full parameter sets are too slow for a page).
//!
//! [`Demo`] is plain Rust so it can be tested natively; [`WasmDemo`] wraps
//! it for JavaScript and returns JSON strings.

use hhe_core::bfv::{BfvProfile, Ciphertext};
use hhe_core::data::{synth_generate, Label};
use hhe_core::hhe::{
    hhe_dec, hhe_decomp_prepared, hhe_enc_many, hhe_eval, hhe_keygen, hhe_prepare_key, EncryptedSymKey,
    HheKeyBundle, LinearLayerCircuit,
};
use hhe_core::ml::{decode_scores, infer_integer, IntegerFcModel, QuantizedSample};
use hhe_core::pasta::{CipherProfile, SymCiphertext, PASTA3_LIKE, TEST};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub fn ring() -> BfvProfile {
    BfvProfile::custom("demo-2048", 2048, 6, 60)
}

#[derive(Debug, Serialize)]
pub struct Uploaded {
    pub words: Vec<u64>,
    pub cipher_words: Vec<u64>,
    pub symmetric_bytes: usize,
    pub key_bytes: usize,
    /// What the same input costs as one BFV ciphertext.
    pub bfv_bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct Transciphered {
    pub recovered: Vec<u64>,
    pub exact: bool,
    pub rotations: u64,
    pub ct_ct_muls: u64,
    pub ct_pt_muls: u64,
    pub noise_budget: u32,
}

#[derive(Debug, Serialize)]
pub struct Classified {
    pub features: Vec<f64>,
    pub label: String,
    pub truth: usize,
    pub integer_scores: Vec<i64>,
    pub encrypted_scores: Vec<i64>,
    pub class: usize,
    pub noise_budget: u32,
}

struct Pending {
    words: Vec<u64>,
    ct: SymCiphertext,
    key: EncryptedSymKey,
}

pub struct Demo {
    rng: ChaCha20Rng,
    small: HheKeyBundle,
    ecg: Option<(HheKeyBundle, LinearLayerCircuit)>,
    model: IntegerFcModel,
    pending: Option<Pending>,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn keys(cipher: CipherProfile, rng: &mut ChaCha20Rng) -> Result<HheKeyBundle, String> {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    hhe_keygen(ring(), cipher, &seed).map_err(err)
}

/// Comma- or space-separated integers below `p`, at most `t` of them.
pub fn parse_words(text: &str, p: u64, t: usize) -> Result<Vec<u64>, String> {
    let words = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| match s.parse::<u64>() {
            Ok(v) if v < p => Ok(v),
            _ => Err(format!("{s:?} is not an integer in [0, {p})")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if words.is_empty() || words.len() > t {
        return Err(format!("enter 1 to {t} numbers, got {}", words.len()));
    }
    Ok(words)
}

impl Demo {
    pub fn new(seed: u64) -> Result<Self, String> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let small = keys(TEST, &mut rng)?;
        Ok(Self {
            rng,
            small,
            ecg: None,
            model: IntegerFcModel::fixture(),
            pending: None,
        })
    }

    /// Stream-cipher encryption of up to one block, with the HE-encrypted key.
    pub fn encrypt(&mut self, text: &str) -> Result<Uploaded, String> {
        let b = &self.small;
        let words = parse_words(text, b.cipher.p, b.cipher.t)?;
        let mut seed = [0u8; 32];
        self.rng.fill_bytes(&mut seed);
        let (mut cts, key) = hhe_enc_many(&b.encryptor(), &b.cipher, &[words.clone()], &seed).map_err(err)?;
        let ct = cts.remove(0);
        let bfv: Ciphertext = b.encryptor().encrypt_slots(&words, &mut self.rng).map_err(err)?;
        let up = Uploaded {
            words: words.clone(),
            cipher_words: ct.words.clone(),
            symmetric_bytes: ct.serialized_len(),
            key_bytes: key.to_bytes(&b.ctx).len(),
            bfv_bytes: bfv.to_bytes(&b.ctx).len(),
        };
        self.pending = Some(Pending { words, ct, key });
        Ok(up)
    }

    /// Server side of the last upload: keystream under HE, subtracted from
    /// the cipher words, then decrypted by the key holder.
    pub fn transcipher(&self) -> Result<Transciphered, String> {
        let p = self.pending.as_ref().ok_or("encrypt something first")?;
        let b = &self.small;
        let ev = b.evaluator();
        let key = hhe_prepare_key(&ev, &p.key).map_err(err)?;
        let before = ev.counters().snapshot();
        let block = hhe_decomp_prepared(&ev, &p.ct, &key).map_err(err)?.remove(0);
        let ops = ev.counters().snapshot() - before;
        let dec = b.decryptor();
        let slots = hhe_dec(&dec, &block.ct).map_err(err)?;
        let recovered = slots[..p.words.len()].to_vec();
        Ok(Transciphered {
            exact: recovered == p.words,
            recovered,
            rotations: ops.rotations,
            ct_ct_muls: ops.ct_ct_muls,
            ct_pt_muls: ops.ct_pt_muls,
            noise_budget: dec.noise_budget(&block.ct).map_err(err)?,
        })
    }

    /// One synthetic beat through upload, transciphering and the encrypted
    /// linear layer. Keys for the 128-word cipher are made on first use.
    pub fn classify(&mut self, beat_seed: u64) -> Result<Classified, String> {
        if self.ecg.is_none() {
            let b = keys(PASTA3_LIKE, &mut self.rng)?;
            let circuit = self.model.encrypt(&b.encryptor(), &b.cipher, &mut self.rng).map_err(err)?;
            self.ecg = Some((b, circuit));
        }
        let (b, circuit) = self.ecg.as_ref().expect("just set");
        let rec = synth_generate(1, beat_seed).map_err(err)?.remove(0);
        let q = QuantizedSample::from_record(&rec).map_err(err)?;
        let mut seed = [0u8; 32];
        self.rng.fill_bytes(&mut seed);
        let (cts, key) = hhe_enc_many(&b.encryptor(), &b.cipher, &[q.as_field()], &seed).map_err(err)?;
        let ev = b.evaluator();
        let prepared = hhe_prepare_key(&ev, &key).map_err(err)?;
        let block = hhe_decomp_prepared(&ev, &cts[0], &prepared).map_err(err)?.remove(0);
        let out = hhe_eval(&ev, circuit, &block).map_err(err)?;
        let dec = b.decryptor();
        let scores = decode_scores(circuit, &b.cipher.field(), &hhe_dec(&dec, &out).map_err(err)?);
        Ok(Classified {
            label: rec.label.to_string(),
            truth: Label::class(rec.label),
            integer_scores: infer_integer(&self.model, &q.features).map_err(err)?,
            class: hhe_core::ml::argmax(&scores),
            encrypted_scores: scores,
            noise_budget: dec.noise_budget(&out).map_err(err)?,
            features: rec.features,
        })
    }
}

fn json<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(err))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub struct WasmDemo(Demo);

#[wasm_bindgen]
impl WasmDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<WasmDemo, JsValue> {
        Demo::new(u64::from(seed)).map(WasmDemo).map_err(|e| JsValue::from_str(&e))
    }

    pub fn encrypt(&mut self, text: &str) -> Result<String, JsValue> {
        json(self.0.encrypt(text))
    }

    pub fn transcipher(&self) -> Result<String, JsValue> {
        json(self.0.transcipher())
    }

    pub fn classify(&mut self, beat_seed: u32) -> Result<String, JsValue> {
        json(self.0.classify(u64::from(beat_seed)))
    }
}
