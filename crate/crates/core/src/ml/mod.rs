//! Quantized single-layer classification: 4-bit features, a fully
//! connected integer layer, and its plaintext, mod-`p` and encrypted
//! evaluations.
//!
//! Activation (sigmoid, argmax) always runs in the clear, after the linear
//! layer; only the layer itself is ever evaluated homomorphically.


use std::fmt;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::bfv::Encryptor;
use crate::data::EcgRecord;
use crate::hhe::LinearLayerCircuit;
use crate::pasta::CipherProfile;
use crate::ring::PrimeField;
use crate::{Error, Result};

pub const LEVELS: u8 = 15;

/// `round_half_up(x * 15)` after clamping to `[0, 1]`. The second value
/// counts clamped inputs.
pub fn quantize(xs: &[f64]) -> Result<(Vec<u8>, usize)> {
    let mut clipped = 0;
    let q = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if x.is_nan() {
                return Err(Error::Domain(format!("sample {i} is NaN")));
            }
            if !(0.0..=1.0).contains(&x) {
                clipped += 1;
            }
            Ok((x.clamp(0.0, 1.0) * f64::from(LEVELS) + 0.5).floor() as u8)
        })
        .collect::<Result<Vec<u8>>>()?;
    Ok((q, clipped))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedSample {
    pub features: Vec<u8>,
    /// Binary class: 0 normal, 1 diseased.
    pub label: usize,
}

impl QuantizedSample {
    pub fn new(features: Vec<u8>, label: usize) -> Result<Self> {
        if let Some(v) = features.iter().find(|&&v| v > LEVELS) {
            return Err(Error::Domain(format!("quantized value {v} > {LEVELS}")));
        }
        Ok(Self { features, label })
    }

    pub fn from_record(r: &EcgRecord) -> Result<Self> {
        Self::new(quantize(&r.features)?.0, r.label.class())
    }

    pub fn as_field(&self) -> Vec<u64> {
        self.features.iter().map(|&v| u64::from(v)).collect()
    }
}

/// Weights file layout.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    out_dim: usize,
    in_dim: usize,
    weights: Vec<Vec<i64>>,
    bias: Vec<i64>,
    #[serde(default)]
    scale_note: String,
}

/// `x -> W x + b` over the integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerFcModel {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<Vec<i64>>,
    pub bias: Vec<i64>,
    pub scale_note: String,
}

const FIXTURE: &str = include_str!("../../fixtures/ecg_fc_weights.json");

impl IntegerFcModel {
    pub fn new(weights: Vec<Vec<i64>>, bias: Vec<i64>) -> Result<Self> {
        let out_dim = weights.len();
        let in_dim = weights.first().map_or(0, Vec::len);
        if out_dim == 0 || in_dim == 0 {
            return Err(Error::Shape("empty model".into()));
        }
        if weights.iter().any(|r| r.len() != in_dim) {
            return Err(Error::Shape("ragged weight rows".into()));
        }
        if bias.len() != out_dim {
            return Err(Error::Shape(format!("{} biases for {out_dim} rows", bias.len())));
        }
        // keeps every intermediate sum far inside i64
        let cap = 1i64 << 40;
        if weights.iter().flatten().chain(&bias).any(|v| v.abs() >= cap) {
            return Err(Error::Domain("weight magnitude ≥ 2^40".into()));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            scale_note: String::new(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::Format(format!("weights file: {e}")))?;
        let mut m = Self::new(f.weights, f.bias)?;
        if m.in_dim != f.in_dim || m.out_dim != f.out_dim {
            return Err(Error::Shape(format!(
                "declared {}x{}, found {}x{}",
                f.out_dim, f.in_dim, m.out_dim, m.in_dim
            )));
        }
        m.scale_note = f.scale_note;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            out_dim: self.out_dim,
            in_dim: self.in_dim,
            weights: self.weights.clone(),
            bias: self.bias.clone(),
            scale_note: self.scale_note.clone(),
        })
        .expect("plain data")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The shipped 2 x 128 model for synthetic beats.
    pub fn fixture() -> Self {
        Self::from_json(FIXTURE).expect("valid fixture")
    }

    /// `sum_k |w[r,k]| * 15 + |b[r]|`: the largest score row `r` can reach
    /// on quantized input.
    pub fn worst_case(&self, r: usize) -> i64 {
        self.weights[r].iter().map(|w| w.abs() * i64::from(LEVELS)).sum::<i64>() + self.bias[r].abs()
    }

    /// Rows whose scores can wrap modulo `p` (worst case ≥ p/2).
    pub fn wrap_rows(&self, p: u64) -> Vec<usize> {
        (0..self.out_dim).filter(|&r| self.worst_case(r) >= (p / 2) as i64).collect()
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.in_dim {
            return Err(Error::Shape(format!("{len} features for a {}-input model", self.in_dim)));
        }
        Ok(())
    }

    /// Weights and biases as residues mod `p`.
    pub fn to_field(&self, field: &PrimeField) -> (Vec<Vec<u64>>, Vec<u64>) {
        let w = self
            .weights
            .iter()
            .map(|r| r.iter().map(|&v| field.from_signed(v)).collect())
            .collect();
        let b = self.bias.iter().map(|&v| field.from_signed(v)).collect();
        (w, b)
    }

    /// Encrypted weight rows for the server.
    pub fn encrypt<R: RngCore>(&self, enc: &Encryptor, cipher: &CipherProfile, rng: &mut R) -> Result<LinearLayerCircuit> {
        let (w, b) = self.to_field(&cipher.field());
        LinearLayerCircuit::encrypt(enc, cipher, &w, &b, rng)
    }
}

/// First index of the maximum.
pub fn argmax<T: PartialOrd + Copy>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Scores are divided by this before the sigmoid, so that it stays
/// injective in `f64` for |s| well past p/2. At 1024 it rounds to 1.0
/// above about 30 000.
pub const SIGMOID_SCALE: f64 = 4096.0;

pub fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s / SIGMOID_SCALE).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arithmetic {
    /// Unquantized features (scaled by 15), `f64` arithmetic, sigmoid.
    Float,
    Integer,
}

pub fn infer_integer(model: &IntegerFcModel, x: &[u8]) -> Result<Vec<i64>> {
    model.check_input(x.len())?;
    Ok(model
        .weights
        .iter()
        .zip(&model.bias)
        .map(|(w, b)| w.iter().zip(x).map(|(&w, &x)| w * i64::from(x)).sum::<i64>() + b)
        .collect())
}

/// Sigmoid outputs over `f64` scores of the raw features.
pub fn infer_float(model: &IntegerFcModel, x: &[f64]) -> Result<Vec<f64>> {
    model.check_input(x.len())?;
    Ok(model
        .weights
        .iter()
        .zip(&model.bias)
        .map(|(w, &b)| {
            let s: f64 = w.iter().zip(x).map(|(&w, &x)| w as f64 * x * f64::from(LEVELS)).sum();
            sigmoid(s + b as f64)
        })
        .collect())
}

/// `(W x + b) mod p`, lifted into `(-p/2, p/2]`.
pub fn infer_modp_oracle(model: &IntegerFcModel, field: &PrimeField, x: &[u8]) -> Result<Vec<i64>> {
    model.check_input(x.len())?;
    let (w, b) = model.to_field(field);
    Ok(w.iter()
        .zip(&b)
        .map(|(row, &b)| {
            let s = row
                .iter()
                .zip(x)
                .fold(b, |acc, (&w, &x)| field.add(acc, field.mul(w, u64::from(x))));
            field.lift_signed(s)
        })
        .collect())
}

/// Signed scores from decrypted output slots.
pub fn decode_scores(circuit: &LinearLayerCircuit, field: &PrimeField, slots: &[u64]) -> Vec<i64> {
    circuit.scores(slots).into_iter().map(|v| field.lift_signed(v)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Float,
    Integer,
    ModP,
    Encrypted,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Float => "float",
            Mode::Integer => "integer",
            Mode::ModP => "mod-p",
            Mode::Encrypted => "encrypted",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Signed scores; sigmoid outputs in float mode.
    pub scores: Vec<f64>,
    pub class: usize,
    pub truth: usize,
}

impl Prediction {
    pub fn from_ints(scores: &[i64], truth: usize) -> Self {
        Self {
            class: argmax(scores),
            scores: scores.iter().map(|&s| s as f64).collect(),
            truth,
        }
    }

    pub fn from_floats(scores: Vec<f64>, truth: usize) -> Self {
        Self {
            class: argmax(&scores),
            scores,
            truth,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub mode: Mode,
    pub rows: Vec<Prediction>,
}

impl PredictionReport {
    pub fn new(mode: Mode) -> Self {
        Self { mode, rows: Vec::new() }
    }

    pub fn correct(&self) -> usize {
        self.rows.iter().filter(|r| r.class == r.truth).count()
    }

    /// `correct / total` over the first `n` rows; 0 when empty.
    pub fn accuracy_at(&self, n: usize) -> f64 {
        let rows = &self.rows[..n.min(self.rows.len())];
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().filter(|r| r.class == r.truth).count() as f64 / rows.len() as f64
    }

    pub fn accuracy(&self) -> f64 {
        self.accuracy_at(self.rows.len())
    }

    pub fn classes(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.class).collect()
    }
}

/// Float, integer and (optionally) encrypted predictions for the same
/// samples.
pub fn plain_reports(model: &IntegerFcModel, records: &[EcgRecord]) -> Result<(PredictionReport, PredictionReport)> {
    let mut float = PredictionReport::new(Mode::Float);
    let mut int = PredictionReport::new(Mode::Integer);
    for r in records {
        let q = QuantizedSample::from_record(r)?;
        float.rows.push(Prediction::from_floats(infer_float(model, &r.features)?, q.label));
        int.rows.push(Prediction::from_ints(&infer_integer(model, &q.features)?, q.label));
    }
    Ok((float, int))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub inputs: usize,
    pub float: f64,
    pub integer: f64,
    pub encrypted: f64,
}

/// One row per input count: accuracy of each mode over its first `n`
/// samples. All three reports must cover the same samples in order.
pub fn evaluate_accuracy(
    float: &PredictionReport,
    integer: &PredictionReport,
    encrypted: &PredictionReport,
    counts: &[usize],
) -> Result<Vec<AccuracyRow>> {
    let truth = |r: &PredictionReport| r.rows.iter().map(|p| p.truth).collect::<Vec<_>>();
    let t = truth(float);
    if truth(integer) != t || truth(encrypted) != t {
        return Err(Error::Shape("reports cover different samples".into()));
    }
    counts
        .iter()
        .map(|&n| {
            if n == 0 || n > t.len() {
                return Err(Error::Shape(format!("{n} inputs requested, {} available", t.len())));
            }
            Ok(AccuracyRow {
                inputs: n,
                float: float.accuracy_at(n),
                integer: integer.accuracy_at(n),
                encrypted: encrypted.accuracy_at(n),
            })
        })
        .collect()
}
