use crate::bfv::{Ciphertext, Evaluator, PeriodicEncoder, PreparedPlaintext, Raised};
use crate::pasta::{block_layers, Affine, Nonce, SymCiphertext};
use crate::{par, Error, Result};

use super::plan::{Plan, Split};
use super::{EncryptedSymKey, TranscipheredInput};

/// Rotations `0..first.n1` of the key ciphertext, shared by every block
/// under that key.
pub struct PreparedKey {
    pub(crate) plan: Plan,
    pub(crate) cipher: crate::pasta::CipherProfile,
    pub(crate) babies: Vec<Ciphertext>,
}

impl PreparedKey {
    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn babies(&self) -> &[Ciphertext] {
        &self.babies
    }
}

pub fn hhe_prepare_key(ev: &Evaluator, ck: &EncryptedSymKey) -> Result<PreparedKey> {
    let plan = Plan::new(ev.context(), &ck.cipher)?;
    let top = ev.context().max_level();
    if ck.ct.level() != top || ck.ct.size() != 2 {
        return Err(Error::Level(format!(
            "encrypted key must be a fresh ciphertext at level {top}"
        )));
    }
    // b = b' + g n1 with b' < n1: one giant rotation, then hoisted babies
    let Split { n1, .. } = plan.inner;
    let small: Vec<i64> = (0..n1.min(plan.first.n1) as i64).collect();
    let mut babies = Vec::with_capacity(plan.first.n1);
    for g in 0..plan.first.n1.div_ceil(n1) {
        let base = ev.rotate(&ck.ct, (g * n1) as i64)?;
        babies.extend(ev.rotate_hoisted(&base, &small)?);
    }
    babies.truncate(plan.first.n1);
    Ok(PreparedKey {
        plan,
        cipher: ck.cipher,
        babies,
    })
}

/// `[[2 M_L, M_R], [M_L, 2 M_R]]` and `[2 c_L + c_R; c_L + 2 c_R]`: the
/// affine layer fused with the mix. Rows at or beyond `rows` are zeroed.
fn fused(a: &Affine, b: &Affine, p: u64, rows: usize) -> (Vec<Vec<u64>>, Vec<u64>) {
    let t = a.t;
    let m = 2 * t;
    let entry = |i: usize, j: usize| -> u64 {
        if i >= rows {
            return 0;
        }
        let (bi, ri) = (i / t, i % t);
        let (bj, cj) = (j / t, j % t);
        let v = if bj == 0 { a.m[ri * t + cj] } else { b.m[ri * t + cj] };
        if bi == bj {
            2 * v % p
        } else {
            v
        }
    };
    let diags = (0..m)
        .map(|d| (0..m).map(|i| entry(i, (i + d) % m)).collect())
        .collect();
    let c = (0..m)
        .map(|i| {
            if i >= rows {
                return 0;
            }
            let r = i % t;
            if i < t {
                (2 * a.c[r] + b.c[r]) % p
            } else {
                (a.c[r] + 2 * b.c[r]) % p
            }
        })
        .collect();
    (diags, c)
}

enum Babies<'a> {
    Plain(&'a [Ciphertext]),
    /// Not yet divided by the special prime: each giant step divides once.
    Raised(Vec<Raised>),
}

/// Diagonal method, baby-step giant-step: `sum_g rot(sum_b D'_{g,b} * rot(v, b), g n1)`
/// with `D'_{g,b} = rot(diag_{g n1 + b}, -g n1)`.
fn affine(
    ev: &Evaluator,
    pe: &PeriodicEncoder,
    babies: Babies<'_>,
    level: usize,
    split: Split,
    diags: &[Vec<u64>],
    constant: &[u64],
) -> Result<Ciphertext> {
    let m = diags.len();
    let mut acc: Option<Ciphertext> = None;
    for g in 0..split.n2 {
        let shift = g * split.n1;
        let diag = |b: usize| -> Vec<u64> {
            let d = &diags[shift + b];
            (0..m).map(|i| d[(i + m - shift) % m]).collect()
        };
        let sum = match &babies {
            Babies::Plain(cts) => {
                let pts = (0..split.n1)
                    .map(|b| pe.prepare(&diag(b), level))
                    .collect::<Result<Vec<PreparedPlaintext>>>()?;
                ev.dot_plain(&cts.iter().zip(&pts).collect::<Vec<_>>())?
            }
            Babies::Raised(rs) => {
                let pts = (0..split.n1)
                    .map(|b| pe.prepare_raised(&diag(b), level))
                    .collect::<Result<Vec<PreparedPlaintext>>>()?;
                ev.dot_plain_raised(&rs.iter().zip(&pts).collect::<Vec<_>>())?
            }
        };
        let inner = if shift == 0 { sum } else { ev.rotate(&sum, shift as i64)? };
        acc = Some(match acc {
            None => inner,
            Some(a) => ev.add(&a, &inner)?,
        });
    }
    ev.add_scaled(&acc.expect("n2 >= 1"), &pe.scaled(constant, level)?)
}

fn switch(ev: &Evaluator, ct: Ciphertext, level: usize) -> Result<Ciphertext> {
    if level < ct.level() {
        ev.mod_switch_to(&ct, level)
    } else {
        Ok(ct)
    }
}

/// One block: keystream circuit, then `Encode(c) - Z`.
pub(crate) fn block(
    ev: &Evaluator,
    pe: &PeriodicEncoder,
    key: &PreparedKey,
    nonce: &Nonce,
    j: u64,
    words: &[u64],
) -> Result<TranscipheredInput> {
    let plan = &key.plan;
    let cipher = &key.cipher;
    let (p, t, m) = (cipher.p, plan.t, plan.m);
    let layers = block_layers(cipher, nonce, j)?;
    let mask: Vec<u64> = (0..m).map(|i| u64::from(i % t != 0)).collect();
    let mut state: Option<Ciphertext> = None;
    for (i, [a, b]) in layers.iter().enumerate() {
        let rows = if i == cipher.rounds { words.len() } else { m };
        let (diags, constant) = fused(a, b, p, rows);
        let mut x = match state.take() {
            None => {
                let level = key.babies[0].level();
                affine(ev, pe, Babies::Plain(&key.babies), level, plan.first, &diags, &constant)?
            }
            Some(s) => {
                let steps: Vec<i64> = (0..plan.inner.n1 as i64).collect();
                let babies = Babies::Raised(ev.rotate_hoisted_raised(&s, &steps)?);
                affine(ev, pe, babies, s.level(), plan.inner, &diags, &constant)?
            }
        };
        if i + 1 < cipher.rounds {
            // s_j += s_{j-1}^2 for every j not at a branch start
            let sq = ev.rotate(&ev.square(&x)?, -1)?;
            let masked = ev.mul_plain(&sq, &pe.prepare(&mask, x.level())?)?;
            x = switch(ev, ev.add(&x, &masked)?, plan.levels[i])?;
        } else if i + 1 == cipher.rounds {
            x = switch(ev, ev.mul(&ev.square(&x)?, &x)?, plan.levels[i])?;
        }
        state = Some(x);
    }
    let z = state.expect("at least one layer");
    let mut cw = vec![0u64; m];
    cw[..words.len()].copy_from_slice(words);
    let out = ev.add_scaled(&ev.negate(&z), &pe.scaled(&cw, z.level())?)?;
    Ok(TranscipheredInput {
        ct: switch(ev, out, plan.output_level())?,
        nonce: *nonce,
        block: j,
        len: words.len(),
    })
}

/// Transcipher every block of `c`, in parallel across blocks.
pub fn hhe_decomp_prepared(ev: &Evaluator, c: &SymCiphertext, key: &PreparedKey) -> Result<Vec<TranscipheredInput>> {
    if c.profile != key.cipher {
        return Err(Error::Parameter(format!(
            "ciphertext profile {} does not match key profile {}",
            c.profile.name, key.cipher.name
        )));
    }
    if c.is_empty() {
        return Err(Error::Shape("empty symmetric ciphertext".into()));
    }
    if let Some(w) = c.words.iter().find(|&&w| w >= c.profile.p) {
        return Err(Error::Domain(format!("cipher word {w} >= p")));
    }
    let pe = PeriodicEncoder::new(ev.context(), key.plan.m)?;
    let jobs: Vec<usize> = (0..c.num_blocks()).collect();
    par::map(jobs, |j| block(ev, &pe, key, &c.nonce, j as u64, c.block(j))).into_iter().collect()
}

/// Key preparation followed by transciphering.
pub fn hhe_decomp(ev: &Evaluator, c: &SymCiphertext, ck: &EncryptedSymKey) -> Result<Vec<TranscipheredInput>> {
    if c.profile != ck.cipher {
        return Err(Error::Parameter(format!(
            "ciphertext profile {} does not match key profile {}",
            c.profile.name, ck.cipher.name
        )));
    }
    hhe_decomp_prepared(ev, c, &hhe_prepare_key(ev, ck)?)
}
