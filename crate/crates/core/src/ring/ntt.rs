//! Negacyclic number-theoretic transform over `Z_q[X]/(X^N + 1)`.
//!
//! Forward transform is Cooley-Tukey with bit-reversed output, inverse is
//! Gentleman-Sande; both use Harvey's lazy butterflies with Shoup
//! multiplication, so `q` must stay below 2^62. After the forward
//! transform, index `i` holds the evaluation at `psi^(2*brv(i) + 1)`.

use super::modulus::Modulus;
use crate::{Error, Result};

#[derive(Debug)]
pub struct NttTable {
    modulus: Modulus,
    degree: usize,
    log_degree: u32,
    psi: u64,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

#[inline]
pub(crate) fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

impl NttTable {
    pub fn new(q: u64, degree: usize) -> Result<Self> {
        if !degree.is_power_of_two() || degree < 2 {
            return Err(Error::Parameter(format!("degree {degree} is not a power of two")));
        }
        let modulus = Modulus::new(q)?;
        let two_n = 2 * degree as u64;
        if (q - 1) % two_n != 0 {
            return Err(Error::Parameter(format!("{q} is not 1 mod {two_n}")));
        }
        let psi = Self::primitive_root(&modulus, two_n)?;
        Self::with_psi(modulus, degree, psi)
    }

    /// Table for a given primitive `2 * degree`-th root `psi`.
    pub fn with_psi(modulus: Modulus, degree: usize, psi: u64) -> Result<Self> {
        let q = modulus.value();
        if !degree.is_power_of_two() || degree < 2 || modulus.pow(psi, degree as u64) != q - 1 {
            return Err(Error::Parameter(format!("{psi} is not a primitive {}-th root mod {q}", 2 * degree)));
        }
        let log_degree = degree.trailing_zeros();
        let psi_inv = modulus.inv(psi)?;

        let powers = |base: u64| {
            let mut pw = vec![0u64; degree];
            let mut acc = 1u64;
            for i in 0..degree {
                pw[bit_reverse(i, log_degree)] = acc;
                acc = modulus.mul(acc, base);
            }
            pw
        };
        let psi_rev = powers(psi);
        let psi_inv_rev = powers(psi_inv);
        let psi_rev_shoup = psi_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let psi_inv_rev_shoup = psi_inv_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let n_inv = modulus.inv(degree as u64)?;
        Ok(Self {
            modulus,
            degree,
            log_degree,
            psi,
            psi_rev,
            psi_rev_shoup,
            psi_inv_rev,
            psi_inv_rev_shoup,
            n_inv,
            n_inv_shoup: modulus.shoup(n_inv),
        })
    }

    /// Smallest-base primitive `order`-th root of unity, found deterministically.
    fn primitive_root(m: &Modulus, order: u64) -> Result<u64> {
        let q = m.value();
        let cofactor = (q - 1) / order;
        for g in 2..q.min(1 << 20) {
            let cand = m.pow(g, cofactor);
            if m.pow(cand, order / 2) == q - 1 {
                return Ok(cand);
            }
        }
        Err(Error::Parameter(format!("no primitive {order}-th root mod {q}")))
    }

    #[inline]
    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    #[inline]
    pub fn q(&self) -> u64 {
        self.modulus.value()
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn psi(&self) -> u64 {
        self.psi
    }

    /// Odd exponent `e` such that forward-NTT slot `i` is `a(psi^e)`.
    pub fn slot_exponent(&self, i: usize) -> usize {
        2 * bit_reverse(i, self.log_degree) + 1
    }

    /// In-place forward transform; input coefficients in `[0, q)`.
    pub fn forward(&self, a: &mut [u64]) {
        assert_eq!(a.len(), self.degree);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let n = self.degree;
        let mut t = n >> 1;
        let mut m = 1;
        while t >= 1 {
            let ws = &self.psi_rev[m..2 * m];
            let wss = &self.psi_rev_shoup[m..2 * m];
            if t == 1 {
                for ((pair, &w), &wsh) in a.chunks_exact_mut(2).zip(ws).zip(wss) {
                    let u = csub(pair[0], two_q);
                    let v = lazy(pair[1], w, wsh, q);
                    pair[0] = u + v;
                    pair[1] = u + two_q - v;
                }
            } else {
                for ((blk, &w), &wsh) in a.chunks_exact_mut(2 * t).zip(ws).zip(wss) {
                    let (lo, hi) = blk.split_at_mut(t);
                    for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                        let u = csub(*x, two_q);
                        let v = lazy(*y, w, wsh, q);
                        *x = u + v;
                        *y = u + two_q - v;
                    }
                }
            }
            m <<= 1;
            t >>= 1;
        }
        for x in a.iter_mut() {
            *x = csub(csub(*x, two_q), q);
        }
    }

    /// In-place inverse transform; input in `[0, q)`, output in `[0, q)`.
    pub fn inverse(&self, a: &mut [u64]) {
        assert_eq!(a.len(), self.degree);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let n = self.degree;
        let mut t = 1;
        let mut h = n >> 1;
        while h >= 1 {
            let ws = &self.psi_inv_rev[h..2 * h];
            let wss = &self.psi_inv_rev_shoup[h..2 * h];
            if t == 1 {
                for ((pair, &w), &wsh) in a.chunks_exact_mut(2).zip(ws).zip(wss) {
                    let (u, v) = (pair[0], pair[1]);
                    pair[0] = csub(u + v, two_q);
                    pair[1] = lazy(u + two_q - v, w, wsh, q);
                }
            } else {
                for ((blk, &w), &wsh) in a.chunks_exact_mut(2 * t).zip(ws).zip(wss) {
                    let (lo, hi) = blk.split_at_mut(t);
                    for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                        let (u, v) = (*x, *y);
                        *x = csub(u + v, two_q);
                        *y = lazy(u + two_q - v, w, wsh, q);
                    }
                }
            }
            t <<= 1;
            h >>= 1;
        }
        let (ni, nis) = (self.n_inv, self.n_inv_shoup);
        for x in a.iter_mut() {
            let r = lazy(*x, ni, nis, q);
            *x = csub(r, q);
        }
    }
}

/// `x - m` if `x >= m`, branch-free.
#[inline(always)]
pub(crate) fn csub(x: u64, m: u64) -> u64 {
    x.min(x.wrapping_sub(m))
}

/// Shoup product in `[0, 2q)`.
#[inline(always)]
fn lazy(a: u64, w: u64, w_shoup: u64, q: u64) -> u64 {
    let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
    a.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(q))
}


#[cfg(test)]
mod timing {
    use super::*;
    use crate::ring::prime::primes_below;

    #[test]
    #[ignore]
    fn ntt_timing() {
        let n = 16384;
        let q = primes_below(2 * n as u64, 60, 1, &[]).unwrap()[0];
        let t = NttTable::new(q, n).unwrap();
        let mut a: Vec<u64> = (0..n as u64).map(|i| i * 7919 % q).collect();
        let s = std::time::Instant::now();
        for _ in 0..200 {
            t.forward(&mut a);
            t.inverse(&mut a);
        }
        eprintln!("fwd+inv: {:.3} ms", s.elapsed().as_secs_f64() * 1e3 / 200.0);
        let m = t.modulus();
        let s = std::time::Instant::now();
        let mut acc = 1u64;
        for _ in 0..200 {
            for x in a.iter() {
                acc = m.mul(acc, *x | 1);
            }
        }
        eprintln!("barrett mul x N: {:.3} ms ({acc})", s.elapsed().as_secs_f64() * 1e3 / 200.0);
    }
}
