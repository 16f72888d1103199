//! Encrypted ECG inference, directly against the library or through the
//! full message protocol.

use std::collections::BTreeMap;
use std::time::Instant;

use hhe_core::bfv::{BfvProfile, OpCounts};
use hhe_core::data::EcgRecord;
use hhe_core::hhe::{hhe_dec, hhe_decomp_prepared, hhe_enc_many, hhe_eval, hhe_prepare_key, HheKeyBundle};
use hhe_core::ml::{
    decode_scores, evaluate_accuracy, infer_modp_oracle, plain_reports, AccuracyRow, IntegerFcModel, Mode, Prediction,
    PredictionReport, QuantizedSample,
};
use hhe_core::pasta::CipherProfile;
use hhe_protocol::{HygieneReport, Session, SessionConfig};
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;

use crate::files::seed32;
use crate::report::{BenchReport, ByteRow, OpRow, TimeRow};
use crate::{CliError, Result};

pub fn quantized(records: &[EcgRecord]) -> Result<Vec<QuantizedSample>> {
    Ok(records.iter().map(QuantizedSample::from_record).collect::<hhe_core::Result<_>>()?)
}

/// Mod-p oracle predictions.
pub fn oracle_report(model: &IntegerFcModel, cipher: &CipherProfile, samples: &[QuantizedSample]) -> Result<PredictionReport> {
    let field = cipher.field();
    let mut r = PredictionReport::new(Mode::ModP);
    for s in samples {
        r.rows.push(Prediction::from_ints(&infer_modp_oracle(model, &field, &s.features)?, s.label));
    }
    Ok(r)
}

/// All samples under one cipher key, transciphered and classified with the
/// library calls alone.
pub fn infer_encrypted(bundle: &HheKeyBundle, model: &IntegerFcModel, samples: &[QuantizedSample], seed: u64) -> Result<PredictionReport> {
    let field = bundle.cipher.field();
    let ev = bundle.evaluator();
    let mut rng = ChaCha20Rng::from_seed(seed32(seed, "model"));
    let circuit = model.encrypt(&bundle.encryptor(), &bundle.cipher, &mut rng)?;
    let xs: Vec<Vec<u64>> = samples.iter().map(QuantizedSample::as_field).collect();
    let (cts, ck) = hhe_enc_many(&bundle.encryptor(), &bundle.cipher, &xs, &seed32(seed, "ecg upload"))?;
    let prepared = hhe_prepare_key(&ev, &ck)?;
    let dec = bundle.decryptor();
    let mut report = PredictionReport::new(Mode::Encrypted);
    for (c, s) in cts.iter().zip(samples) {
        let blocks = hhe_decomp_prepared(&ev, c, &prepared)?;
        if blocks.len() != 1 {
            return Err(CliError::invalid(format!(
                "{} features span {} cipher blocks; use a cipher with t >= {}",
                s.features.len(),
                blocks.len(),
                s.features.len()
            )));
        }
        let out = hhe_eval(&ev, &circuit, &blocks[0])?;
        let scores = decode_scores(&circuit, &field, &hhe_dec(&dec, &out)?);
        report.rows.push(Prediction::from_ints(&scores, s.label));
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: hhe_protocol::Mode,
    pub bfv: BfvProfile,
    pub cipher: CipherProfile,
    pub seed: u64,
    pub users: u8,
    /// Cumulative input counts; each step is one upload round.
    pub counts: Vec<usize>,
    pub keep_bytes: bool,
}

pub struct ProtocolRun {
    pub session: Session,
    pub float: PredictionReport,
    pub integer: PredictionReport,
    pub modp: PredictionReport,
    pub encrypted: PredictionReport,
    pub accuracy: Vec<AccuracyRow>,
    /// Per-edge byte totals after each count.
    pub edges: Vec<(usize, BTreeMap<String, u64>)>,
    pub ops: Vec<(usize, OpCounts)>,
    pub seconds: Vec<(&'static str, usize, f64)>,
}

impl ProtocolRun {
    pub fn oracle_agreement(&self) -> usize {
        self.encrypted
            .rows
            .iter()
            .zip(&self.modp.rows)
            .filter(|(e, o)| e.scores == o.scores)
            .count()
    }

    pub fn hygiene(&self) -> HygieneReport {
        self.session.hygiene()
    }

    pub fn report(&self, cfg: &RunConfig) -> BenchReport {
        let scenario = format!("run-protocol/{}", cfg.mode);
        let mut r = BenchReport::new(&scenario, cfg.bfv.name, cfg.cipher.name, cfg.seed, &cfg.counts);
        for (n, edges) in &self.edges {
            for (edge, &bytes) in edges {
                r.bytes.push(ByteRow {
                    edge: edge.clone(),
                    inputs: *n as u64,
                    bytes,
                });
            }
        }
        for (n, c) in &self.ops {
            r.ops.push(OpRow::new("csp", *n, *c));
        }
        for &(phase, n, s) in &self.seconds {
            r.times.push(TimeRow::from_samples(phase, n, &[s]));
        }
        for a in &self.accuracy {
            r.metric("accuracy/float", a.inputs, a.float);
            r.metric("accuracy/integer", a.inputs, a.integer);
            r.metric("accuracy/encrypted", a.inputs, a.encrypted);
        }
        let n = self.encrypted.rows.len();
        r.metric("oracle-agreement", n, self.oracle_agreement() as f64 / n.max(1) as f64);
        r
    }
}

fn check_counts(counts: &[usize], available: usize) -> Result<()> {
    if counts.is_empty() || counts[0] == 0 || counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::invalid("input counts must be positive and increasing"));
    }
    let last = *counts.last().expect("non-empty");
    if last > available {
        return Err(CliError::invalid(format!("{last} inputs requested, the dataset has {available}")));
    }
    Ok(())
}

/// Setup, model upload, then one upload round per count step: the new
/// samples are split round-robin across users, each user uploads its share
/// under a fresh cipher key, and every sample is evaluated and classified.
pub fn run_protocol(cfg: &RunConfig, model: &IntegerFcModel, records: &[EcgRecord]) -> Result<ProtocolRun> {
    check_counts(&cfg.counts, records.len())?;
    if cfg.users == 0 {
        return Err(CliError::invalid("at least one user"));
    }
    let total = *cfg.counts.last().expect("checked");
    let records = &records[..total];
    let samples = quantized(records)?;
    let (float, integer) = plain_reports(model, records)?;
    let modp = oracle_report(model, &cfg.cipher, &samples)?;

    let start = Instant::now();
    let mut session = Session::setup(SessionConfig {
        mode: cfg.mode,
        bfv: cfg.bfv,
        cipher: cfg.cipher,
        users: (0..cfg.users).collect(),
        seed: seed32(cfg.seed, "session"),
        keep_bytes: cfg.keep_bytes,
    })?;
    let mut seconds = vec![("setup", 0, start.elapsed().as_secs_f64())];
    session.send_model(model)?;

    let mut encrypted = PredictionReport::new(Mode::Encrypted);
    let mut edges = Vec::new();
    let mut ops = Vec::new();
    let mut next_index = vec![0usize; cfg.users as usize];
    let mut prev = 0;
    for &count in &cfg.counts {
        let start = Instant::now();
        let mut placed = Vec::new();
        for u in 0..cfg.users {
            let mine: Vec<usize> = (prev..count).filter(|i| i % cfg.users as usize == u as usize).collect();
            if mine.is_empty() {
                continue;
            }
            let xs: Vec<Vec<u64>> = mine.iter().map(|&i| samples[i].as_field()).collect();
            session.upload(u, &xs)?;
            for i in mine {
                placed.push((i, u, next_index[u as usize]));
                next_index[u as usize] += 1;
            }
        }
        seconds.push(("upload", count, start.elapsed().as_secs_f64()));
        placed.sort();
        let start = Instant::now();
        for (i, u, idx) in placed {
            encrypted.rows.push(session.infer_encrypted(u, idx, samples[i].label)?);
        }
        seconds.push(("infer", count, start.elapsed().as_secs_f64()));
        edges.push((count, session.transcript().edge_totals()));
        let c = session.csp().evaluator().map(|e| e.counters().snapshot()).unwrap_or_default();
        ops.push((count, c));
        prev = count;
    }
    let accuracy = evaluate_accuracy(&float, &integer, &encrypted, &cfg.counts)?;
    Ok(ProtocolRun {
        session,
        float,
        integer,
        modp,
        encrypted,
        accuracy,
        edges,
        ops,
        seconds,
    })
}
