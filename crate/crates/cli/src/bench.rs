//! Upload-cost and pipeline measurements.

use std::time::Instant;

use hhe_core::bfv::{OpCounts, Evaluator};
use hhe_core::hhe::{hhe_dec, hhe_decomp_prepared, hhe_enc_many, hhe_enc_with_key, hhe_eval, hhe_prepare_key, HheKeyBundle};
use hhe_core::ml::IntegerFcModel;
use hhe_core::pasta::{self, SymCiphertext};
use hhe_protocol::messages::Upload;
use hhe_protocol::PartyId;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;

use crate::files::seed32;
use crate::report::{BenchReport, ByteRow, OpRow, TimeRow};
use crate::{CliError, Result};

/// Length of the dummy inputs of the upload comparison.
pub const UPLOAD_LEN: usize = 4;

pub fn random_vectors(rng: &mut impl Rng, n: usize, len: usize, p: u64) -> Vec<Vec<u64>> {
    (0..n).map(|_| (0..len).map(|_| rng.gen_range(0..p)).collect()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UploadMode {
    Hhe,
    PlainBfv,
    Both,
}

impl std::str::FromStr for UploadMode {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hhe" => Ok(Self::Hhe),
            "plain-bfv" => Ok(Self::PlainBfv),
            "both" => Ok(Self::Both),
            _ => Err(CliError::invalid(format!("unknown upload mode {s:?} (hhe, plain-bfv, both)"))),
        }
    }
}

/// Payload bytes of one upload of `inputs` vectors.
#[derive(Clone, Debug, Default)]
pub struct UploadCost {
    pub inputs: usize,
    /// Symmetric ciphertexts only.
    pub symmetric: u64,
    /// The encrypted cipher key.
    pub key: u64,
    /// The whole m1 payload.
    pub hhe_total: u64,
    /// `inputs` fresh BFV ciphertexts.
    pub plain: u64,
    pub hhe_seconds: f64,
    pub plain_seconds: f64,
}

impl UploadCost {
    pub fn symmetric_ratio(&self) -> f64 {
        self.symmetric as f64 / self.plain as f64
    }

    pub fn total_ratio(&self) -> f64 {
        self.hhe_total as f64 / self.plain as f64
    }
}

pub fn upload_cost(bundle: &HheKeyBundle, xs: &[Vec<u64>], seed: u64, mode: UploadMode) -> Result<UploadCost> {
    let ctx = &bundle.ctx;
    let enc = bundle.encryptor();
    let mut cost = UploadCost {
        inputs: xs.len(),
        ..UploadCost::default()
    };
    if mode != UploadMode::PlainBfv {
        let start = Instant::now();
        let (inputs, key) = hhe_enc_many(&enc, &bundle.cipher, xs, &seed32(seed, "upload"))?;
        cost.hhe_seconds = start.elapsed().as_secs_f64();
        cost.symmetric = inputs.iter().map(SymCiphertext::serialized_len).sum::<usize>() as u64;
        cost.key = key.to_bytes(ctx).len() as u64;
        let up = Upload {
            user: PartyId::user(0)?,
            inputs,
            key,
        };
        cost.hhe_total = up.encode(ctx).len() as u64;
    }
    if mode != UploadMode::Hhe {
        let mut rng = ChaCha20Rng::from_seed(seed32(seed, "plain-bfv"));
        let start = Instant::now();
        for x in xs {
            cost.plain += enc.encrypt_slots(x, &mut rng)?.to_bytes(ctx).len() as u64;
        }
        cost.plain_seconds = start.elapsed().as_secs_f64();
    }
    Ok(cost)
}

pub fn upload_report(bundle: &HheKeyBundle, grid: &[usize], seed: u64, mode: UploadMode) -> Result<(BenchReport, Vec<UploadCost>)> {
    let p = bundle.cipher.p;
    let scenario = match mode {
        UploadMode::Hhe => "bench-upload/hhe",
        UploadMode::PlainBfv => "bench-upload/plain-bfv",
        UploadMode::Both => "bench-upload",
    };
    let mut report = BenchReport::new(scenario, bundle.ctx.profile.name, bundle.cipher.name, seed, grid);
    let mut costs = Vec::new();
    for &n in grid {
        if n == 0 {
            return Err(CliError::invalid("input counts must be at least 1"));
        }
        let mut rng = ChaCha20Rng::from_seed(seed32(seed, &format!("upload inputs {n}")));
        let xs = random_vectors(&mut rng, n, UPLOAD_LEN, p);
        let c = upload_cost(bundle, &xs, seed, mode)?;
        if mode != UploadMode::PlainBfv {
            report.bytes.push(ByteRow { edge: "hhe/symmetric".into(), inputs: n as u64, bytes: c.symmetric });
            report.bytes.push(ByteRow { edge: "hhe/key".into(), inputs: n as u64, bytes: c.key });
            report.bytes.push(ByteRow { edge: "hhe/total".into(), inputs: n as u64, bytes: c.hhe_total });
            report.times.push(TimeRow::from_samples("hhe-enc", n, &[c.hhe_seconds]));
        }
        if mode != UploadMode::Hhe {
            report.bytes.push(ByteRow { edge: "plain-bfv/total".into(), inputs: n as u64, bytes: c.plain });
            report.times.push(TimeRow::from_samples("bfv-enc", n, &[c.plain_seconds]));
        }
        if mode == UploadMode::Both {
            report.metric("symmetric/plain", n, c.symmetric_ratio());
            report.metric("hhe/plain", n, c.total_ratio());
        }
        costs.push(c);
    }
    Ok((report, costs))
}

/// Phases of one pipeline run over `n` inputs.
#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub inputs: usize,
    pub words: usize,
    pub ops: Vec<(&'static str, OpCounts)>,
    pub seconds: Vec<(&'static str, f64)>,
    /// Scores that differ from the mod-p oracle.
    pub mismatches: usize,
}

fn counted<T>(ev: &Evaluator, f: impl FnOnce() -> Result<T>) -> Result<(T, OpCounts, f64)> {
    let before = ev.counters().snapshot();
    let start = Instant::now();
    let out = f()?;
    let secs = start.elapsed().as_secs_f64();
    Ok((out, ev.counters().snapshot() - before, secs))
}

/// SKE.Enc, key preparation, Decomp, Eval and Dec over `n` full-block inputs.
pub fn pipeline_run(
    bundle: &HheKeyBundle,
    ev: &Evaluator,
    model: &IntegerFcModel,
    circuit: &hhe_core::hhe::LinearLayerCircuit,
    n: usize,
    seed: u64,
) -> Result<PipelineRun> {
    let cipher = bundle.cipher;
    let field = cipher.field();
    let mut rng = ChaCha20Rng::from_seed(seed32(seed, &format!("pipeline {n}")));
    let xs = random_vectors(&mut rng, n, model.in_dim, cipher.p);
    let key = pasta::ske_gen(&cipher, &seed32(seed, &format!("pipeline key {n}")))?;

    let start = Instant::now();
    for (i, x) in xs.iter().enumerate() {
        pasta::ske_enc(&key, &seed32(seed, &format!("nonce {i}"))[..16].try_into().expect("16 bytes"), x)?;
    }
    let ske = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let (cts, ck) = hhe_enc_with_key(&bundle.encryptor(), &key, &xs, &seed32(seed, "pipeline upload"))?;
    let upload = start.elapsed().as_secs_f64();

    let (prepared, prep_ops, prep_s) = counted(ev, || Ok(hhe_prepare_key(ev, &ck)?))?;
    let (blocks, decomp_ops, decomp_s) = counted(ev, || {
        let mut out = Vec::with_capacity(n);
        for c in &cts {
            out.extend(hhe_decomp_prepared(ev, c, &prepared)?);
        }
        Ok(out)
    })?;
    let (results, eval_ops, eval_s) = counted(ev, || {
        blocks.iter().map(|b| Ok(hhe_eval(ev, circuit, b)?)).collect::<Result<Vec<_>>>()
    })?;
    let dec = bundle.decryptor();
    let start = Instant::now();
    let slots = results.iter().map(|ct| hhe_dec(&dec, ct)).collect::<hhe_core::Result<Vec<_>>>()?;
    let dec_s = start.elapsed().as_secs_f64();

    let (w, b) = model.to_field(&field);
    let mut mismatches = 0;
    for (x, s) in xs.iter().zip(&slots) {
        let got = circuit.scores(s);
        let want: Vec<u64> = w
            .iter()
            .zip(&b)
            .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &x)| field.add(acc, field.mul(w, x))))
            .collect();
        mismatches += got.iter().zip(&want).filter(|(g, w)| g != w).count();
    }
    Ok(PipelineRun {
        inputs: n,
        words: n * model.in_dim,
        ops: vec![("key-prep", prep_ops), ("decomp", decomp_ops), ("eval", eval_ops)],
        seconds: vec![
            ("ske-enc", ske),
            ("hhe-enc", upload),
            ("key-prep", prep_s),
            ("decomp", decomp_s),
            ("eval", eval_s),
            ("dec", dec_s),
        ],
        mismatches,
    })
}

/// A two-row model over a full block, weights in `[-8, 8]`.
pub fn bench_model(in_dim: usize, seed: u64) -> Result<IntegerFcModel> {
    let mut rng = ChaCha20Rng::from_seed(seed32(seed, "bench model"));
    let w = (0..2).map(|_| (0..in_dim).map(|_| rng.gen_range(-8..=8)).collect()).collect();
    let b = (0..2).map(|_| rng.gen_range(-100..=100)).collect();
    Ok(IntegerFcModel::new(w, b)?)
}

/// `repeat` runs per grid point. Operation counts must agree across runs;
/// times are averaged.
pub fn pipeline_report(bundle: &HheKeyBundle, grid: &[usize], repeat: usize, seed: u64) -> Result<BenchReport> {
    if grid.is_empty() || grid.contains(&0) || repeat == 0 {
        return Err(CliError::invalid("grid values and --repeat must be at least 1"));
    }
    let mut report = BenchReport::new("bench-pipeline", bundle.ctx.profile.name, bundle.cipher.name, seed, grid);
    let ev = bundle.evaluator();
    let model = bench_model(bundle.cipher.t, seed)?;
    let mut rng = ChaCha20Rng::from_seed(seed32(seed, "bench model encryption"));
    let circuit = model.encrypt(&bundle.encryptor(), &bundle.cipher, &mut rng)?;
    let mut base: Option<(usize, Vec<u64>)> = None;
    for &n in grid {
        let runs = (0..repeat)
            .map(|_| pipeline_run(bundle, &ev, &model, &circuit, n, seed))
            .collect::<Result<Vec<_>>>()?;
        let first = &runs[0];
        if runs.iter().any(|r| r.ops != first.ops) {
            return Err(CliError::Crypto(format!("operation counts changed between runs at n = {n}")));
        }
        for (phase, c) in &first.ops {
            report.ops.push(OpRow::new(phase, n, *c));
        }
        for (k, (phase, _)) in first.seconds.iter().enumerate() {
            let secs: Vec<f64> = runs.iter().map(|r| r.seconds[k].1).collect();
            report.times.push(TimeRow::from_samples(phase, n, &secs));
        }
        report.metric("ske-enc/words", n, first.words as f64);
        report.metric("mismatches", n, runs.iter().map(|r| r.mismatches).sum::<usize>() as f64);
        // per-input totals relative to the first grid point; 1 means linear
        let per_input: Vec<u64> = first.ops[1..].iter().map(|(_, c)| c.total()).collect();
        let (n0, b0) = base.get_or_insert((n, per_input.clone())).clone();
        for ((phase, _), (now, then)) in first.ops[1..].iter().zip(per_input.iter().zip(&b0)) {
            let coeff = (*now as f64 / n as f64) / (*then as f64 / n0 as f64);
            report.metric(&format!("linearity/{phase}"), n, coeff);
        }
    }
    Ok(report)
}
