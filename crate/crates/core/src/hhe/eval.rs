use rand_core::RngCore;

use crate::bfv::{BfvContext, Ciphertext, Encryptor, Evaluator};
use crate::codec::{Put, Reader};
use crate::pasta::CipherProfile;
use crate::{Error, Result};

use super::TranscipheredInput;

pub const MODEL_MAGIC: &[u8; 4] = b"HHEW";

/// An encrypted fully connected layer `x -> W x + b` over `F_p`.
///
/// Row `r` lives in window `r` (slots `[r m, r m + in_dim)`, `m = 2t`) of
/// its own ciphertext, zero elsewhere; the bias ciphertext holds `b[r]` at
/// slot `r m`. Since a transciphered input repeats in every window, the
/// row products can be summed before one shared fold, and score `r` ends
/// up in slot `r m` of a single output ciphertext.
#[derive(Clone, Debug)]
pub struct LinearLayerCircuit {
    pub in_dim: usize,
    pub out_dim: usize,
    pub window: usize,
    pub rows: Vec<Ciphertext>,
    pub bias: Ciphertext,
}

impl LinearLayerCircuit {
    /// `weights` and `bias` as residues mod `p` (negative values already
    /// reduced).
    pub fn encrypt<R: RngCore>(
        enc: &Encryptor,
        cipher: &CipherProfile,
        weights: &[Vec<u64>],
        bias: &[u64],
        rng: &mut R,
    ) -> Result<Self> {
        let ctx = enc.context();
        super::check_pairing(ctx, cipher)?;
        let window = cipher.key_len();
        let out_dim = weights.len();
        let in_dim = weights.first().map_or(0, Vec::len);
        Self::check_shape(in_dim, out_dim, window, cipher.t, ctx.slots())?;
        if weights.iter().any(|w| w.len() != in_dim) || bias.len() != out_dim {
            return Err(Error::Shape("ragged weight rows or bias length".into()));
        }
        let n = ctx.slots();
        let mut rows = Vec::with_capacity(out_dim);
        for (r, w) in weights.iter().enumerate() {
            let mut slots = vec![0u64; n];
            slots[r * window..r * window + in_dim].copy_from_slice(w);
            rows.push(enc.encrypt_slots(&slots, rng)?);
        }
        let mut b = vec![0u64; n];
        for (r, &v) in bias.iter().enumerate() {
            b[r * window] = v;
        }
        let bias = enc.encrypt_slots(&b, rng)?;
        Ok(Self {
            in_dim,
            out_dim,
            window,
            rows,
            bias,
        })
    }

    fn check_shape(in_dim: usize, out_dim: usize, window: usize, t: usize, slots: usize) -> Result<()> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Shape("empty layer".into()));
        }
        if in_dim > t {
            return Err(Error::Shape(format!("{in_dim} inputs exceed the block size {t}")));
        }
        if out_dim * window > slots {
            return Err(Error::Shape(format!(
                "{out_dim} rows of width {window} exceed {slots} slots"
            )));
        }
        Ok(())
    }

    pub fn score_slot(&self, r: usize) -> usize {
        r * self.window
    }

    /// Scores from the decrypted output slots.
    pub fn scores(&self, slots: &[u64]) -> Vec<u64> {
        (0..self.out_dim).map(|r| slots[self.score_slot(r)]).collect()
    }

    /// `HHEW`, version u16, `in_dim`, `out_dim`, `window` (u32 each), then
    /// `out_dim + 1` length-prefixed ciphertexts, bias last.
    pub fn to_bytes(&self, ctx: &BfvContext) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.put_u16(1);
        for v in [self.in_dim, self.out_dim, self.window] {
            out.put_u32(v as u32);
        }
        for ct in self.rows.iter().chain([&self.bias]) {
            let b = ct.to_bytes(ctx);
            out.put_u64(b.len() as u64);
            out.extend(b);
        }
        out
    }

    pub fn from_bytes(ctx: &BfvContext, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect_magic(MODEL_MAGIC, 1)?;
        let in_dim = r.u32()? as usize;
        let out_dim = r.u32()? as usize;
        let window = r.u32()? as usize;
        if !window.is_power_of_two() {
            return Err(Error::Format(format!("window {window} is not a power of two")));
        }
        Self::check_shape(in_dim, out_dim, window, window / 2, ctx.slots()).map_err(|e| Error::Format(e.to_string()))?;
        let mut cts = Vec::with_capacity(out_dim + 1);
        for _ in 0..=out_dim {
            let n = r.u64()?;
            if n > r.remaining() as u64 {
                return Err(Error::Format("truncated model ciphertext".into()));
            }
            cts.push(Ciphertext::from_bytes(ctx, r.bytes(n as usize)?)?);
        }
        r.finish()?;
        let bias = cts.pop().expect("out_dim + 1 ciphertexts");
        Ok(Self {
            in_dim,
            out_dim,
            window,
            rows: cts,
            bias,
        })
    }

    /// Rotate-and-add steps summing `in_dim` slots into the first.
    pub fn fold_steps(&self) -> Vec<i64> {
        let mut steps = Vec::new();
        let mut k = self.in_dim.next_power_of_two() / 2;
        while k >= 1 {
            steps.push(k as i64);
            k /= 2;
        }
        steps
    }
}

fn at_level(ev: &Evaluator, ct: &Ciphertext, level: usize) -> Result<Ciphertext> {
    if ct.level() > level {
        ev.mod_switch_to(ct, level)
    } else if ct.level() == level {
        Ok(ct.clone())
    } else {
        Err(Error::Level(format!(
            "model ciphertext at level {} below input level {level}",
            ct.level()
        )))
    }
}

/// `W x + b`: score `r` in slot `r * window` of the result.
pub fn hhe_eval(ev: &Evaluator, circuit: &LinearLayerCircuit, input: &TranscipheredInput) -> Result<Ciphertext> {
    let ctx = ev.context();
    LinearLayerCircuit::check_shape(circuit.in_dim, circuit.out_dim, circuit.window, circuit.window / 2, ctx.slots())?;
    if circuit.rows.len() != circuit.out_dim {
        return Err(Error::Shape(format!(
            "{} row ciphertexts for {} outputs",
            circuit.rows.len(),
            circuit.out_dim
        )));
    }
    let level = input.ct.level();
    let rows = circuit
        .rows
        .iter()
        .map(|r| at_level(ev, r, level))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<_> = rows.iter().map(|r| (r, &input.ct)).collect();
    let mut acc = ev.mul_sum(&pairs)?;
    for k in circuit.fold_steps() {
        acc = ev.add(&acc, &ev.rotate(&acc, k)?)?;
    }
    ev.add(&acc, &at_level(ev, &circuit.bias, level)?)
}
