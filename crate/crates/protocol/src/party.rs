//! Party state. Each party only sees bytes through its [`Inbox`]; the CSP
//! holds no decryptor and no secret HE material by construction.

use std::collections::BTreeMap;
use std::sync::Arc;

use hhe_core::bfv::{BfvContext, Ciphertext, Encryptor, EvaluationKey, Evaluator, PublicKey};
use hhe_core::hhe::{
    hhe_dec, hhe_decomp_prepared, hhe_enc_with_key, hhe_eval, hhe_prepare_key, EncryptedSymKey, HheKeyBundle,
    LinearLayerCircuit, PreparedKey,
};
use hhe_core::ml::IntegerFcModel;
use hhe_core::pasta::{ske_gen, CipherProfile, SymCiphertext, SymKey};
use rand_chacha::ChaCha20Rng;
use rand_core::RngCore;

use crate::envelope::{Directory, Envelope, Inbox, PartyId, PayloadType, Signer};
use crate::messages::{self, HeResult, InputRef, SealedResult, Upload};
use crate::pke::{self, PkePublic, PkeSecret};
use crate::{ProtocolError, Result};

fn expect_from(env: &Envelope, who: PartyId, me: PartyId) -> Result<()> {
    if env.sender != who {
        return Err(ProtocolError::Unexpected(me, kind_name(env.kind)));
    }
    Ok(())
}

pub(crate) fn kind_name(k: PayloadType) -> &'static str {
    match k {
        PayloadType::EvalKey => "an evaluation key",
        PayloadType::PublicKey => "a public key",
        PayloadType::PkeKey => "a PKE key",
        PayloadType::Upload => "an upload",
        PayloadType::Model => "a model",
        PayloadType::HeResult => "an HE result",
        PayloadType::SealedResult => "a sealed result",
    }
}

pub struct User {
    pub(crate) signer: Signer,
    inbox: Inbox,
    keyholder: PartyId,
    pk: Option<PublicKey>,
    rng: ChaCha20Rng,
    pub(crate) pke: PkeSecret,
    /// Kept for the hygiene scan.
    pub(crate) sym_keys: Vec<SymKey>,
    pub(crate) sent: Vec<Vec<u64>>,
}

impl User {
    pub(crate) fn new(signer: Signer, keyholder: PartyId, rng: ChaCha20Rng, pke: PkeSecret) -> Self {
        Self {
            signer,
            inbox: Inbox::default(),
            keyholder,
            pk: None,
            rng,
            pke,
            sym_keys: Vec::new(),
            sent: Vec::new(),
        }
    }

    pub(crate) fn receive(&mut self, ctx: &BfvContext, dir: &Directory, bytes: &[u8]) -> Result<()> {
        let env = self.inbox.accept(dir, bytes)?;
        let me = self.signer.id();
        match env.kind {
            PayloadType::PublicKey => {
                expect_from(&env, self.keyholder, me)?;
                self.pk = Some(PublicKey::from_bytes(ctx, &env.payload)?);
                Ok(())
            }
            k => Err(ProtocolError::Unexpected(me, kind_name(k))),
        }
    }

    /// m1 for a batch of vectors under one fresh cipher key.
    pub(crate) fn upload(&mut self, ctx: &Arc<BfvContext>, cipher: &CipherProfile, xs: &[Vec<u64>]) -> Result<Envelope> {
        let pk = self
            .pk
            .as_ref()
            .ok_or_else(|| ProtocolError::Setup(format!("{} has no HE public key", self.signer.id())))?;
        let mut seed = [0u8; 32];
        self.rng.fill_bytes(&mut seed);
        let key = ske_gen(cipher, &seed)?;
        self.rng.fill_bytes(&mut seed);
        let (inputs, ck) = hhe_enc_with_key(&Encryptor::new(ctx, pk), &key, xs, &seed)?;
        self.sym_keys.push(key);
        self.sent.extend(xs.iter().cloned());
        let body = Upload {
            user: self.signer.id(),
            inputs,
            key: ck,
        };
        Ok(self.signer.seal(PayloadType::Upload, body.encode(ctx)))
    }
}

struct Batch {
    inputs: Vec<SymCiphertext>,
    key: EncryptedSymKey,
    prepared: Option<PreparedKey>,
}

/// Cloud service provider: stores what users upload, evaluates.
pub struct Csp {
    pub(crate) signer: Signer,
    inbox: Inbox,
    ctx: Arc<BfvContext>,
    keyholder: PartyId,
    analyst: PartyId,
    evk: Option<Arc<EvaluationKey>>,
    evaluator: Option<Evaluator>,
    store: BTreeMap<PartyId, Vec<Batch>>,
    model: Option<LinearLayerCircuit>,
    results: BTreeMap<InputRef, Ciphertext>,
}

impl Csp {
    pub(crate) fn new(signer: Signer, ctx: Arc<BfvContext>, keyholder: PartyId) -> Self {
        Self {
            signer,
            inbox: Inbox::default(),
            ctx,
            keyholder,
            analyst: PartyId::ANALYST,
            evk: None,
            evaluator: None,
            store: BTreeMap::new(),
            model: None,
            results: BTreeMap::new(),
        }
    }

    pub(crate) fn receive(&mut self, dir: &Directory, bytes: &[u8]) -> Result<()> {
        let env = self.inbox.accept(dir, bytes)?;
        let me = self.signer.id();
        match env.kind {
            PayloadType::EvalKey => {
                expect_from(&env, self.keyholder, me)?;
                let evk = Arc::new(EvaluationKey::from_bytes(&self.ctx, &env.payload)?);
                self.evaluator = Some(Evaluator::new(&self.ctx, evk.clone()));
                self.evk = Some(evk);
            }
            PayloadType::Upload => {
                let up = Upload::decode(&self.ctx, &env.payload)?;
                if up.user != env.sender || env.sender.role() != crate::Role::User {
                    return Err(ProtocolError::Unexpected(me, "an upload on behalf of another party"));
                }
                self.store.entry(up.user).or_default().push(Batch {
                    inputs: up.inputs,
                    key: up.key,
                    prepared: None,
                });
            }
            PayloadType::Model => {
                expect_from(&env, self.analyst, me)?;
                self.model = Some(LinearLayerCircuit::from_bytes(&self.ctx, &env.payload)?);
                self.results.clear();
            }
            k => return Err(ProtocolError::Unexpected(me, kind_name(k))),
        }
        Ok(())
    }

    /// Number of symmetric ciphertexts stored for `user`.
    pub fn stored_inputs(&self, user: PartyId) -> usize {
        self.store.get(&user).map_or(0, |b| b.iter().map(|b| b.inputs.len()).sum())
    }

    pub fn has_model(&self) -> bool {
        self.model.is_some()
    }

    fn locate(&self, input: InputRef) -> Result<(usize, usize)> {
        let batches = self
            .store
            .get(&input.user)
            .ok_or_else(|| ProtocolError::NotFound(format!("no uploads from {}", input.user)))?;
        let mut i = input.index as usize;
        for (b, batch) in batches.iter().enumerate() {
            if i < batch.inputs.len() {
                return Ok((b, i));
            }
            i -= batch.inputs.len();
        }
        Err(ProtocolError::NotFound(format!("input {} of {}", input.index, input.user)))
    }

    /// Transcipher one stored input and apply the model.
    pub(crate) fn evaluate(&mut self, input: InputRef) -> Result<()> {
        let (b, i) = self.locate(input)?;
        let ev = self
            .evaluator
            .as_ref()
            .ok_or_else(|| ProtocolError::Setup("CSP has no evaluation key".into()))?;
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| ProtocolError::NotFound("no model uploaded".into()))?;
        let batch = &mut self.store.get_mut(&input.user).expect("located")[b];
        if batch.prepared.is_none() {
            batch.prepared = Some(hhe_prepare_key(ev, &batch.key)?);
        }
        let prepared = batch.prepared.as_ref().expect("just prepared");
        let mut blocks = hhe_decomp_prepared(ev, &batch.inputs[i], prepared)?;
        if blocks.len() != 1 {
            return Err(hhe_core::Error::Shape(format!(
                "input spans {} cipher blocks; the linear layer takes one",
                blocks.len()
            ))
            .into());
        }
        let res = hhe_eval(ev, model, &blocks.remove(0))?;
        self.results.insert(input, res);
        Ok(())
    }

    pub(crate) fn result_message(&mut self, input: InputRef) -> Result<Envelope> {
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| ProtocolError::NotFound("no model uploaded".into()))?;
        let ct = self
            .results
            .get(&input)
            .ok_or_else(|| ProtocolError::NotFound(format!("no result for input {} of {}", input.index, input.user)))?;
        let body = HeResult {
            input,
            out_dim: model.out_dim as u32,
            window: model.window as u32,
            ct: ct.clone(),
        };
        Ok(self.signer.seal(PayloadType::HeResult, body.encode(&self.ctx)))
    }

    pub fn evaluator(&self) -> Option<&Evaluator> {
        self.evaluator.as_ref()
    }

    /// Everything the CSP holds, serialized, except its own signing key.
    pub fn state_bytes(&self) -> Vec<(String, Vec<u8>)> {
        let ctx = &self.ctx;
        let mut out = Vec::new();
        if let Some(evk) = &self.evk {
            out.push(("evk".into(), evk.to_bytes(ctx)));
        }
        for (user, batches) in &self.store {
            for (b, batch) in batches.iter().enumerate() {
                out.push((format!("{user} batch {b} key"), batch.key.to_bytes(ctx)));
                for (i, c) in batch.inputs.iter().enumerate() {
                    out.push((format!("{user} batch {b} input {i}"), c.to_bytes()));
                }
                if let Some(p) = &batch.prepared {
                    for (k, ct) in p.babies().iter().enumerate() {
                        out.push((format!("{user} batch {b} prepared {k}"), ct.to_bytes(ctx)));
                    }
                }
            }
        }
        if let Some(m) = &self.model {
            out.push(("model".into(), m.to_bytes(ctx)));
        }
        for (r, ct) in &self.results {
            out.push((format!("result {} {}", r.user, r.index), ct.to_bytes(ctx)));
        }
        out
    }
}

/// Model owner; in three-party mode also the HE keyholder.
pub struct Analyst {
    pub(crate) signer: Signer,
    inbox: Inbox,
    ctx: Arc<BfvContext>,
    cipher: CipherProfile,
    pub(crate) bundle: Option<HheKeyBundle>,
    he_pk: Option<PublicKey>,
    keyholder: PartyId,
    pub(crate) pke: PkeSecret,
    rng: ChaCha20Rng,
    scores: BTreeMap<InputRef, Vec<u64>>,
}

impl Analyst {
    pub(crate) fn new(
        signer: Signer,
        ctx: Arc<BfvContext>,
        cipher: CipherProfile,
        bundle: Option<HheKeyBundle>,
        keyholder: PartyId,
        pke: PkeSecret,
        rng: ChaCha20Rng,
    ) -> Self {
        Self {
            signer,
            inbox: Inbox::default(),
            ctx,
            cipher,
            bundle,
            he_pk: None,
            keyholder,
            pke,
            rng,
            scores: BTreeMap::new(),
        }
    }

    pub(crate) fn receive(&mut self, dir: &Directory, bytes: &[u8]) -> Result<()> {
        let env = self.inbox.accept(dir, bytes)?;
        let me = self.signer.id();
        match env.kind {
            PayloadType::PublicKey if self.bundle.is_none() => {
                expect_from(&env, self.keyholder, me)?;
                self.he_pk = Some(PublicKey::from_bytes(&self.ctx, &env.payload)?);
            }
            PayloadType::HeResult => {
                let bundle = self.bundle.as_ref().ok_or(ProtocolError::Unexpected(me, "an HE result"))?;
                expect_from(&env, PartyId::CSP, me)?;
                let res = HeResult::decode(&self.ctx, &env.payload)?;
                let slots = hhe_dec(&bundle.decryptor(), &res.ct)?;
                let s = res.score_slots().map(|i| slots[i]).collect();
                self.scores.insert(res.input, s);
            }
            PayloadType::SealedResult => {
                expect_from(&env, PartyId::TEE, me)?;
                let res = SealedResult::decode(&env.payload)?;
                let plain = self.pke.open(&res.sealed, &res.input.to_bytes())?;
                let s = messages::decode_scores(&plain, self.cipher.p)?;
                self.scores.insert(res.input, s);
            }
            k => return Err(ProtocolError::Unexpected(me, kind_name(k))),
        }
        Ok(())
    }

    pub(crate) fn model_message(&mut self, model: &IntegerFcModel) -> Result<Envelope> {
        let pk = match (&self.bundle, &self.he_pk) {
            (Some(b), _) => b.public_key(),
            (None, Some(pk)) => pk,
            (None, None) => return Err(ProtocolError::Setup("analyst has no HE public key".into())),
        };
        let circuit = model.encrypt(&Encryptor::new(&self.ctx, pk), &self.cipher, &mut self.rng)?;
        Ok(self.signer.seal(PayloadType::Model, circuit.to_bytes(&self.ctx)))
    }

    pub(crate) fn pke_message(&mut self) -> Envelope {
        self.signer.seal(PayloadType::PkeKey, self.pke.public().0.to_vec())
    }

    /// Scores mod `p` received for `input`.
    pub fn scores(&self, input: InputRef) -> Option<&[u64]> {
        self.scores.get(&input).map(Vec::as_slice)
    }
}

/// Simulated enclave: holds the HE secret key, decrypts results and
/// re-encrypts them for the analyst.
pub struct Tee {
    pub(crate) signer: Signer,
    inbox: Inbox,
    pub(crate) bundle: HheKeyBundle,
    analyst_pke: Option<PkePublic>,
    rng: ChaCha20Rng,
}

impl Tee {
    pub(crate) fn new(signer: Signer, bundle: HheKeyBundle, rng: ChaCha20Rng) -> Self {
        Self {
            signer,
            inbox: Inbox::default(),
            bundle,
            analyst_pke: None,
            rng,
        }
    }

    /// Returns m3 when handed a result.
    pub(crate) fn receive(&mut self, dir: &Directory, bytes: &[u8]) -> Result<Option<Envelope>> {
        let env = self.inbox.accept(dir, bytes)?;
        let me = self.signer.id();
        match env.kind {
            PayloadType::PkeKey => {
                expect_from(&env, PartyId::ANALYST, me)?;
                let key: [u8; 32] = env
                    .payload
                    .as_slice()
                    .try_into()
                    .map_err(|_| ProtocolError::Envelope("PKE key must be 32 bytes".into()))?;
                self.analyst_pke = Some(PkePublic(key));
                Ok(None)
            }
            PayloadType::HeResult => {
                expect_from(&env, PartyId::CSP, me)?;
                let to = self
                    .analyst_pke
                    .ok_or_else(|| ProtocolError::Setup("TEE has no analyst PKE key".into()))?;
                let res = HeResult::decode(&self.bundle.ctx, &env.payload)?;
                let slots = hhe_dec(&self.bundle.decryptor(), &res.ct)?;
                let scores: Vec<u64> = res.score_slots().map(|i| slots[i]).collect();
                let sealed = pke::seal(&to, &messages::encode_scores(&scores), &res.input.to_bytes(), &mut self.rng);
                let body = SealedResult { input: res.input, sealed };
                Ok(Some(self.signer.seal(PayloadType::SealedResult, body.encode())))
            }
            k => Err(ProtocolError::Unexpected(me, kind_name(k))),
        }
    }
}
