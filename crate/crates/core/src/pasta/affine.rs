use super::{field_word, CipherProfile, Nonce};
use crate::xof::Xof;
use crate::{Error, Result};

pub const MAX_RETRIES: u8 = 64;

/// `x -> M x + c` over `F_p`, `M` row-major `t x t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Affine {
    pub t: usize,
    pub m: Vec<u64>,
    pub c: Vec<u64>,
}

impl Affine {
    pub fn row(&self, i: usize) -> &[u64] {
        &self.m[i * self.t..(i + 1) * self.t]
    }

    pub fn apply(&self, x: &[u64], p: u64) -> Vec<u64> {
        // products are below 2^34, so a row sum cannot overflow for any sane t
        (0..self.t)
            .map(|i| {
                let acc: u64 = self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum();
                (acc + self.c[i]) % p
            })
            .collect()
    }
}

/// Full rank over `F_p`, by Gaussian elimination on a copy.
pub fn is_invertible(m: &[u64], t: usize, p: u64) -> bool {
    let f = crate::ring::Modulus::new(p).expect("prime field");
    let mut a = m.to_vec();
    for col in 0..t {
        let Some(piv) = (col..t).find(|&r| a[r * t + col] != 0) else {
            return false;
        };
        if piv != col {
            for k in 0..t {
                a.swap(piv * t + k, col * t + k);
            }
        }
        let inv = f.inv(a[col * t + col]).expect("nonzero pivot");
        for r in col + 1..t {
            let factor = f.mul(a[r * t + col], inv);
            if factor == 0 {
                continue;
            }
            for k in col..t {
                let v = f.mul(factor, a[col * t + k]);
                a[r * t + k] = f.sub(a[r * t + k], v);
            }
        }
    }
    true
}

/// Affine layer for `(nonce, block, round, branch)`. Singular draws are
/// redrawn with the retry counter appended to the XOF domain.
pub fn gen_affine(profile: &CipherProfile, nonce: &Nonce, block: u64, round: u32, branch: u8) -> Result<Affine> {
    let (t, p) = (profile.t, profile.p);
    for retry in 0..MAX_RETRIES {
        let mut x = Xof::new(
            b"PERV-AFF",
            &[
                profile.name.as_bytes(),
                nonce,
                &block.to_le_bytes(),
                &round.to_le_bytes(),
                &[branch],
                &[retry],
            ],
        );
        let m: Vec<u64> = (0..t * t).map(|_| field_word(&mut x, p)).collect();
        if !is_invertible(&m, t, p) {
            continue;
        }
        let c = (0..t).map(|_| field_word(&mut x, p)).collect();
        return Ok(Affine { t, m, c });
    }
    Err(Error::Internal(format!(
        "no invertible matrix after {MAX_RETRIES} draws (block {block}, round {round}, branch {branch})"
    )))
}
