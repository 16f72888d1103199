//! Slot layout, rotation plan and modulus-switching schedule.
//!
//! The cipher state `(L, R)` occupies a window of `m = 2t` slots, repeated
//! across both batching rows. Every rotation therefore acts cyclically on
//! the state, and every plaintext the circuit needs is `m`-periodic.

use std::collections::BTreeSet;

use crate::bfv::BfvContext;
use crate::pasta::CipherProfile;
use crate::{Error, Result};

/// Baby/giant split for an `m x m` diagonal product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Split {
    pub n1: usize,
    pub n2: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plan {
    pub t: usize,
    /// Window (state) width `2t`.
    pub m: usize,
    /// Layers after the first.
    pub inner: Split,
    /// First layer: its baby steps are rotations of the key ciphertext,
    /// computed once per key.
    pub first: Split,
    /// Active limbs after each S-box round, then for the output.
    pub levels: Vec<usize>,
}

impl Plan {
    pub fn new(ctx: &BfvContext, cipher: &CipherProfile) -> Result<Self> {
        check_pairing(ctx, cipher)?;
        let m = 2 * cipher.t;
        let log_m = m.trailing_zeros();
        let n1 = (1usize << (log_m + 2) / 2).min(m);
        let inner = Split { n1, n2: m / n1 };
        let f1 = m.min(64).max(n1);
        let first = Split { n1: f1, n2: m / f1 };
        Ok(Self {
            t: cipher.t,
            m,
            inner,
            first,
            levels: schedule(ctx.max_level(), cipher.rounds),
        })
    }

    /// Steps needed by the circuit, including the fold of a linear layer of
    /// up to `t` inputs.
    pub fn rotation_steps(&self) -> BTreeSet<i64> {
        let mut s: BTreeSet<i64> = (1..self.inner.n1 as i64).collect();
        s.extend((1..self.inner.n2).map(|g| (g * self.inner.n1) as i64));
        s.extend((1..self.first.n2).map(|g| (g * self.first.n1) as i64));
        let mut k = 1;
        while k < self.t {
            s.insert(k as i64);
            k *= 2;
        }
        s.insert(-1);
        s
    }

    pub fn output_level(&self) -> usize {
        *self.levels.last().expect("non-empty schedule")
    }
}

/// Cipher and ring must agree on `p`, and the `2t` window must tile a
/// batching row.
pub fn check_pairing(ctx: &BfvContext, cipher: &CipherProfile) -> Result<()> {
    cipher.validate()?;
    let t = ctx.plain().p();
    if cipher.p != t {
        return Err(Error::Parameter(format!(
            "cipher field {} differs from plaintext modulus {t}",
            cipher.p
        )));
    }
    let m = 2 * cipher.t;
    if !cipher.t.is_power_of_two() || m > ctx.row_size() {
        return Err(Error::Parameter(format!(
            "state width 2t = {m} must be a power of two no larger than the row size {}",
            ctx.row_size()
        )));
    }
    Ok(())
}

/// Levels for the six-limb chains with three rounds. Each switch happens
/// where the measured budget sits comfortably below the next level's
/// capacity (about `60 l - 24` bits), so dropping the limb costs nothing
/// but makes every later operation cheaper:
///
/// | after          | budget (16384 / 8192) | level |
/// |----------------|-----------------------|-------|
/// | Feistel round 0 | 260 / 263            | 5     |
/// | Feistel round 1 | 189 / 193            | 4     |
/// | cube            | 110 / 117            | 3     |
/// | output          | 88 / 96              | 3     |
///
/// Other chains stay at the top level throughout.
const SIX_LIMB_THREE_ROUNDS: [usize; 4] = [5, 4, 3, 3];

pub fn schedule(chain: usize, rounds: usize) -> Vec<usize> {
    if chain == 6 && rounds == 3 {
        SIX_LIMB_THREE_ROUNDS.to_vec()
    } else {
        vec![chain; rounds + 1]
    }
}
