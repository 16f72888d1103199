use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use hhe_core::bfv::{BfvContext, BfvProfile};
use hhe_core::hhe::{hhe_keygen, HheKeyBundle};
use hhe_core::ml::{IntegerFcModel, Prediction};
use hhe_core::pasta::CipherProfile;
use hhe_core::ring::PrimeField;
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::envelope::{Directory, Envelope, PartyId, PayloadType};
use crate::hygiene::{self, Finding, Needle};
use crate::messages::InputRef;
use crate::party::{Analyst, Csp, Tee, User};
use crate::pke::PkeSecret;
use crate::transcript::Transcript;
use crate::{ProtocolError, Result, Signer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// The analyst holds the HE secret key.
    ThreeParty,
    /// A simulated enclave holds it and re-encrypts results for the analyst.
    Tee,
}

impl FromStr for Mode {
    type Err = ProtocolError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "three-party" | "3party" => Ok(Mode::ThreeParty),
            "tee" => Ok(Mode::Tee),
            _ => Err(ProtocolError::Setup(format!("unknown mode {s:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::ThreeParty => "three-party",
            Mode::Tee => "tee",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub mode: Mode,
    pub bfv: BfvProfile,
    pub cipher: CipherProfile,
    /// User numbers (party ids `16 + n`).
    pub users: Vec<u8>,
    pub seed: [u8; 32],
    /// Keep envelope bytes in the transcript (for replay, export, scans).
    pub keep_bytes: bool,
}

/// An envelope in flight.
#[derive(Clone, Debug)]
pub struct Outgoing {
    pub from: PartyId,
    pub to: PartyId,
    pub kind: PayloadType,
    pub timestamp: u64,
    pub bytes: Vec<u8>,
}

fn derive_seed(seed: &[u8; 32], label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"hhe-session v1");
    h.update(seed);
    h.update(label.as_bytes());
    h.finalize().into()
}

fn rng_for(seed: &[u8; 32], label: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(derive_seed(seed, label))
}

/// In-memory deterministic bus between all parties of one deployment.
pub struct Session {
    cfg: SessionConfig,
    ctx: Arc<BfvContext>,
    dir: Directory,
    users: BTreeMap<PartyId, User>,
    csp: Csp,
    analyst: Analyst,
    tee: Option<Tee>,
    transcript: Transcript,
}

#[derive(Clone, Debug, Serialize)]
pub struct HygieneReport {
    pub csp_findings: Vec<Finding>,
    pub transcript_findings: Vec<Finding>,
    pub needles: usize,
    pub scanned_bytes: u64,
}

impl HygieneReport {
    pub fn clean(&self) -> bool {
        self.csp_findings.is_empty() && self.transcript_findings.is_empty()
    }
}

impl Session {
    /// Keys for every party, then the setup messages: evaluation key to the
    /// CSP, HE public key to users (and to the analyst with a TEE), the
    /// analyst's PKE key to the TEE.
    pub fn setup(cfg: SessionConfig) -> Result<Self> {
        let seed = cfg.seed;
        let bundle: HheKeyBundle = hhe_keygen(cfg.bfv, cfg.cipher, &derive_seed(&seed, "keyholder"))?;
        let ctx = bundle.ctx.clone();
        let keyholder = match cfg.mode {
            Mode::ThreeParty => PartyId::ANALYST,
            Mode::Tee => PartyId::TEE,
        };
        let signer = |id: PartyId| Signer::new(id, derive_seed(&seed, &format!("sign {}", id.0)));
        let pke = |id: PartyId| PkeSecret::from_seed(derive_seed(&seed, &format!("pke {}", id.0)));
        let mut dir = Directory::default();

        let mut users = BTreeMap::new();
        for &n in &cfg.users {
            let id = PartyId::user(n)?;
            let s = signer(id);
            dir.insert(id, s.verifying_key())?;
            users.insert(id, User::new(s, keyholder, rng_for(&seed, &format!("user {n}")), pke(id)));
        }
        let csp = Csp::new(signer(PartyId::CSP), ctx.clone(), keyholder);
        dir.insert(PartyId::CSP, csp.signer.verifying_key())?;
        let (analyst_bundle, tee) = match cfg.mode {
            Mode::ThreeParty => (Some(bundle), None),
            Mode::Tee => (None, Some(Tee::new(signer(PartyId::TEE), bundle, rng_for(&seed, "tee")))),
        };
        let analyst = Analyst::new(
            signer(PartyId::ANALYST),
            ctx.clone(),
            cfg.cipher,
            analyst_bundle,
            keyholder,
            pke(PartyId::ANALYST),
            rng_for(&seed, "analyst"),
        );
        dir.insert(PartyId::ANALYST, analyst.signer.verifying_key())?;
        if let Some(t) = &tee {
            dir.insert(PartyId::TEE, t.signer.verifying_key())?;
        }

        let mut s = Self {
            transcript: Transcript::new(cfg.keep_bytes),
            cfg,
            ctx,
            dir,
            users,
            csp,
            analyst,
            tee,
        };
        let (evk, pk) = {
            let b = s.bundle();
            (b.evk().to_bytes(&s.ctx), b.public_key().to_bytes(&s.ctx))
        };
        let mut out = vec![s.seal_as(keyholder, PartyId::CSP, PayloadType::EvalKey, evk)?];
        let ids: Vec<PartyId> = s.users.keys().copied().collect();
        for id in ids {
            out.push(s.seal_as(keyholder, id, PayloadType::PublicKey, pk.clone())?);
        }
        if s.cfg.mode == Mode::Tee {
            out.push(s.seal_as(keyholder, PartyId::ANALYST, PayloadType::PublicKey, pk)?);
            let env = s.analyst.pke_message();
            out.push(s.outgoing(PartyId::TEE, env));
        }
        for o in out {
            s.deliver(&o)?;
        }
        Ok(s)
    }

    fn bundle(&self) -> &HheKeyBundle {
        match (&self.tee, &self.analyst.bundle) {
            (Some(t), _) => &t.bundle,
            (None, Some(b)) => b,
            (None, None) => unreachable!("one party holds the bundle"),
        }
    }

    fn signer_mut(&mut self, id: PartyId) -> Result<&mut Signer> {
        match id {
            PartyId::CSP => Ok(&mut self.csp.signer),
            PartyId::ANALYST => Ok(&mut self.analyst.signer),
            PartyId::TEE => self.tee.as_mut().map(|t| &mut t.signer).ok_or(ProtocolError::UnknownSender(id)),
            _ => self.users.get_mut(&id).map(|u| &mut u.signer).ok_or(ProtocolError::UnknownSender(id)),
        }
    }

    fn seal_as(&mut self, from: PartyId, to: PartyId, kind: PayloadType, payload: Vec<u8>) -> Result<Outgoing> {
        let env = self.signer_mut(from)?.seal(kind, payload);
        Ok(self.outgoing(to, env))
    }

    fn outgoing(&self, to: PartyId, env: Envelope) -> Outgoing {
        Outgoing {
            from: env.sender,
            to,
            kind: env.kind,
            timestamp: env.timestamp,
            bytes: env.to_bytes(),
        }
    }

    /// Hand bytes to their recipient. A reply (the TEE's m3) is returned
    /// rather than delivered.
    pub fn deliver(&mut self, out: &Outgoing) -> Result<Option<Outgoing>> {
        let (dir, ctx) = (&self.dir, &self.ctx);
        let res: Result<Option<Envelope>> = match out.to {
            PartyId::CSP => self.csp.receive(dir, &out.bytes).map(|_| None),
            PartyId::ANALYST => self.analyst.receive(dir, &out.bytes).map(|_| None),
            PartyId::TEE => match self.tee.as_mut() {
                Some(t) => t.receive(dir, &out.bytes),
                None => Err(ProtocolError::NotFound("no TEE in this session".into())),
            },
            id => match self.users.get_mut(&id) {
                Some(u) => u.receive(ctx, dir, &out.bytes).map(|_| None),
                None => Err(ProtocolError::NotFound(format!("recipient {id}"))),
            },
        };
        let outcome = res.as_ref().map(|_| ()).map_err(|e| e.to_string());
        self.transcript.log(out.from, out.to, out.kind, out.timestamp, &out.bytes, outcome);
        Ok(res?.map(|env| self.outgoing(PartyId::ANALYST, env)))
    }

    /// m1: `xs` under one fresh cipher key, not yet delivered.
    pub fn prepare_upload(&mut self, user: u8, xs: &[Vec<u64>]) -> Result<Outgoing> {
        let id = PartyId::user(user)?;
        let (ctx, cipher) = (self.ctx.clone(), self.cfg.cipher);
        let u = self
            .users
            .get_mut(&id)
            .ok_or_else(|| ProtocolError::NotFound(format!("user {user}")))?;
        let env = u.upload(&ctx, &cipher, xs)?;
        Ok(self.outgoing(PartyId::CSP, env))
    }

    pub fn upload(&mut self, user: u8, xs: &[Vec<u64>]) -> Result<()> {
        let o = self.prepare_upload(user, xs)?;
        self.deliver(&o).map(|_| ())
    }

    /// m2: the model encrypted under the keyholder's public key.
    pub fn prepare_model(&mut self, model: &IntegerFcModel) -> Result<Outgoing> {
        let env = self.analyst.model_message(model)?;
        Ok(self.outgoing(PartyId::CSP, env))
    }

    pub fn send_model(&mut self, model: &IntegerFcModel) -> Result<()> {
        let o = self.prepare_model(model)?;
        self.deliver(&o).map(|_| ())
    }

    pub fn input_ref(user: u8, index: usize) -> Result<InputRef> {
        Ok(InputRef {
            user: PartyId::user(user)?,
            index: u32::try_from(index).map_err(|_| ProtocolError::NotFound(format!("input {index}")))?,
        })
    }

    /// Transcipher and evaluate at the CSP.
    pub fn eval_at_csp(&mut self, user: u8, index: usize) -> Result<()> {
        self.csp.evaluate(Self::input_ref(user, index)?)
    }

    /// CSP -> analyst (three-party) or CSP -> TEE.
    pub fn prepare_result(&mut self, user: u8, index: usize) -> Result<Outgoing> {
        let env = self.csp.result_message(Self::input_ref(user, index)?)?;
        let to = match self.cfg.mode {
            Mode::ThreeParty => PartyId::ANALYST,
            Mode::Tee => PartyId::TEE,
        };
        Ok(self.outgoing(to, env))
    }

    /// Deliver the CSP's result and, with a TEE, its m3; returns the
    /// analyst's signed scores.
    pub fn classify(&mut self, user: u8, index: usize) -> Result<Vec<i64>> {
        let o = self.prepare_result(user, index)?;
        if let Some(m3) = self.deliver(&o)? {
            self.deliver(&m3)?;
        }
        self.analyst_scores(user, index)
    }

    pub fn analyst_scores(&self, user: u8, index: usize) -> Result<Vec<i64>> {
        let f = PrimeField::new(self.cfg.cipher.p)?;
        let s = self
            .analyst
            .scores(Self::input_ref(user, index)?)
            .ok_or_else(|| ProtocolError::NotFound(format!("analyst has no result for input {index} of user {user}")))?;
        Ok(s.iter().map(|&v| f.lift_signed(v)).collect())
    }

    /// Evaluate and classify one stored input; activation at the analyst.
    pub fn infer_encrypted(&mut self, user: u8, index: usize, truth: usize) -> Result<Prediction> {
        self.eval_at_csp(user, index)?;
        Ok(Prediction::from_ints(&self.classify(user, index)?, truth))
    }

    pub fn mode(&self) -> Mode {
        self.cfg.mode
    }

    pub fn context(&self) -> &Arc<BfvContext> {
        &self.ctx
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn directory(&self) -> &Directory {
        &self.dir
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn csp(&self) -> &Csp {
        &self.csp
    }

    pub fn analyst(&self) -> &Analyst {
        &self.analyst
    }

    pub fn has_tee(&self) -> bool {
        self.tee.is_some()
    }

    /// Whether the analyst holds an HE secret key.
    pub fn analyst_holds_secret_key(&self) -> bool {
        self.analyst.bundle.is_some()
    }

    /// Every secret in the session, and every plaintext vector uploaded.
    /// With `include_csp`, the CSP's own signing and PKE keys too.
    pub fn secrets(&self, include_csp: bool) -> Vec<Needle> {
        let mut n = Vec::new();
        let sk: Vec<u8> = self.bundle().secret_key().coeffs().iter().map(|&c| c as u8).collect();
        n.push(Needle::new("HE secret key", sk));
        let sign = |label: String, s: &Signer| Needle::new(label, s.secret_bytes().to_vec());
        for (id, u) in &self.users {
            n.push(sign(format!("{id} signing key"), &u.signer));
            n.push(Needle::new(format!("{id} PKE key"), u.pke.secret_bytes().to_vec()));
            for (k, key) in u.sym_keys.iter().enumerate() {
                let b: Vec<u8> = key.words().iter().flat_map(|w| w.to_le_bytes()).collect();
                n.push(Needle::new(format!("{id} cipher key {k}"), b));
            }
            for (i, x) in u.sent.iter().enumerate() {
                let words: Vec<u8> = x.iter().flat_map(|w| w.to_le_bytes()).collect();
                n.push(Needle::whole(format!("{id} input {i} (u64)"), words));
                if x.len() >= 8 && x.iter().all(|&v| v < 256) {
                    n.push(Needle::whole(format!("{id} input {i} (u8)"), x.iter().map(|&v| v as u8).collect::<Vec<_>>()));
                }
            }
        }
        n.push(sign("analyst signing key".into(), &self.analyst.signer));
        n.push(Needle::new("analyst PKE key", self.analyst.pke.secret_bytes().to_vec()));
        if let Some(t) = &self.tee {
            n.push(sign("tee signing key".into(), &t.signer));
        }
        if include_csp {
            n.push(sign("csp signing key".into(), &self.csp.signer));
        }
        n
    }

    /// Scan everything the CSP holds and every envelope (raw and as
    /// exported JSON) for secrets and plaintext inputs.
    pub fn hygiene(&self) -> HygieneReport {
        let csp_state = self.csp.state_bytes();
        let csp_needles = self.secrets(false);
        let csp_findings = hygiene::scan(csp_state.iter().map(|(k, v)| (k.as_str(), v.as_slice())), &csp_needles);

        let all = self.secrets(true);
        let mut with_hex = all.clone();
        with_hex.extend(all.iter().map(Needle::hex));
        let json = self.transcript.to_json_lines(true);
        let records: Vec<(String, &[u8])> = self
            .transcript
            .records()
            .iter()
            .filter_map(|r| r.bytes.as_deref().map(|b| (format!("envelope {}", r.seq), b)))
            .collect();
        let mut hay: Vec<(&str, &[u8])> = records.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        hay.push(("transcript json", json.as_bytes()));
        let transcript_findings = hygiene::scan(hay.iter().copied(), &with_hex);
        let scanned_bytes = csp_state.iter().map(|(_, v)| v.len() as u64).sum::<u64>()
            + hay.iter().map(|(_, v)| v.len() as u64).sum::<u64>();
        HygieneReport {
            csp_findings,
            transcript_findings,
            needles: with_hex.len(),
            scanned_bytes,
        }
    }
}
