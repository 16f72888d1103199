//! RNS base conversions: HPS-style extension and scale-and-round, special
//! prime removal and limb dropping.

use super::params::LevelContext;
use crate::ring::{Domain, RnsPoly};

/// Approximate `Q -> P` extension of a coefficient-domain poly: returns
/// the residues of the centered lift of `x mod Q` in the auxiliary basis
/// (off by a multiple of `Q` only with negligible probability).
pub(crate) fn extend_q_to_aux(lc: &LevelContext, x: &RnsPoly) -> RnsPoly {
    debug_assert_eq!(x.domain(), Domain::Coefficient);
    let n = x.degree();
    let l = lc.level;
    let mut out = RnsPoly::zero(&lc.aux, Domain::Coefficient);
    let mut y = vec![0u64; l];
    let aux_len = lc.aux.len();
    let mut outs: Vec<&mut [u64]> = out.data_mut().chunks_exact_mut(n).collect();
    for j in 0..n {
        let mut v = 0.0f64;
        for i in 0..l {
            let m = lc.q.modulus(i);
            let (w, ws) = lc.qhat_inv[i];
            let yi = m.mul_shoup(x.limb(i)[j], w, ws);
            y[i] = yi;
            v += yi as f64 * lc.q_inv_f64[i];
        }
        let v = v.round() as u64;
        for k in 0..aux_len {
            let m = lc.aux.modulus(k);
            let row = &lc.qhat_mod_aux[k];
            let mut acc: u128 = 0;
            for i in 0..l {
                acc += y[i] as u128 * row[i] as u128;
            }
            let s = m.reduce_u128(acc);
            let corr = m.mul(m.reduce(v), lc.q_mod_aux[k]);
            outs[k][j] = m.sub(s, corr);
        }
    }
    out
}

/// `round(t * x / Q) mod P` for `x` given over `Q ∪ P` (coefficient domain).
pub(crate) fn scale_round_to_aux(lc: &LevelContext, x: &RnsPoly) -> RnsPoly {
    debug_assert_eq!(x.domain(), Domain::Coefficient);
    let n = x.degree();
    let l = lc.level;
    let aux_len = lc.aux.len();
    let mut out = RnsPoly::zero(&lc.aux, Domain::Coefficient);
    let mut outs: Vec<&mut [u64]> = out.data_mut().chunks_exact_mut(n).collect();
    let xs: Vec<&[u64]> = x.limbs().collect();
    for j in 0..n {
        let mut frac: u128 = 1 << 63;
        for i in 0..l {
            frac += xs[i][j] as u128 * lc.mul.theta[i] as u128;
        }
        let r = (frac >> 64) as u64;
        for k in 0..aux_len {
            let m = lc.aux.modulus(k);
            let row = &lc.mul_omega[k];
            let mut acc: u128 = r as u128;
            for i in 0..l {
                acc += xs[i][j] as u128 * row[i] as u128;
            }
            let s = m.reduce_u128(acc);
            let (c, cs) = lc.mul_aux_coef[k];
            outs[k][j] = m.add(s, m.mul_shoup(xs[l + k][j], c, cs));
        }
    }
    out
}

/// Exact `P -> Q` extension of a value known to be far below `P / 2`.
pub(crate) fn extend_aux_to_q(lc: &LevelContext, y: &RnsPoly) -> RnsPoly {
    debug_assert_eq!(y.domain(), Domain::Coefficient);
    let n = y.degree();
    let l = lc.level;
    let aux_len = lc.aux.len();
    let mut out = RnsPoly::zero(&lc.q, Domain::Coefficient);
    let mut outs: Vec<&mut [u64]> = out.data_mut().chunks_exact_mut(n).collect();
    let mut z = vec![0u64; aux_len];
    for j in 0..n {
        let mut v = 0.0f64;
        for k in 0..aux_len {
            let m = lc.aux.modulus(k);
            let (w, ws) = lc.phat_inv[k];
            let zk = m.mul_shoup(y.limb(k)[j], w, ws);
            z[k] = zk;
            v += zk as f64 * lc.p_inv_f64[k];
        }
        let v = v.round() as u64;
        for i in 0..l {
            let m = lc.q.modulus(i);
            let row = &lc.phat_mod_q[i];
            let mut acc: u128 = 0;
            for k in 0..aux_len {
                acc += z[k] as u128 * row[k] as u128;
            }
            let s = m.reduce_u128(acc);
            let corr = m.mul(m.reduce(v), lc.p_mod_q[i]);
            outs[i][j] = m.sub(s, corr);
        }
    }
    out
}

/// `round(t * x / Q) mod t` for each coefficient of `x` (coefficient domain).
pub(crate) fn scale_round_to_plain(lc: &LevelContext, x: &RnsPoly, t: u64) -> Vec<u64> {
    let n = x.degree();
    let l = lc.level;
    let xs: Vec<&[u64]> = x.limbs().collect();
    (0..n)
        .map(|j| {
            let mut frac: u128 = 1 << 63;
            let mut acc: u128 = 0;
            for i in 0..l {
                frac += xs[i][j] as u128 * lc.dec.theta[i] as u128;
                acc += xs[i][j] as u128 * lc.dec_omega[i] as u128;
            }
            ((acc + (frac >> 64)) % t as u128) as u64
        })
        .collect()
}

/// Centered value of a limb coefficient, reduced into another modulus.
#[inline]
fn centered_into(v: u64, from: u64, to: &crate::ring::Modulus) -> u64 {
    if v > from / 2 {
        to.neg(to.reduce(from - v))
    } else {
        to.reduce(v)
    }
}

/// Divide-and-round by the special prime: input over `Q_l ∪ {P_s}` in the
/// NTT domain, output over `Q_l` in the NTT domain.
pub(crate) fn mod_down_special(lc: &LevelContext, mut x: RnsPoly) -> RnsPoly {
    debug_assert_eq!(x.domain(), Domain::Ntt);
    let l = lc.level;
    let n = x.degree();
    let sp_table = lc.ks.table(l).clone();
    let sp = sp_table.q();
    let mut last = x.limb(l).to_vec();
    sp_table.inverse(&mut last);
    x.truncate_to(&lc.q);
    let mut tmp = vec![0u64; n];
    for i in 0..l {
        let m = *lc.q.modulus(i);
        for (o, &v) in tmp.iter_mut().zip(&last) {
            *o = centered_into(v, sp, &m);
        }
        lc.q.table(i).forward(&mut tmp);
        let (w, ws) = lc.special_inv[i];
        for (o, &d) in x.limb_mut(i).iter_mut().zip(&tmp) {
            *o = m.mul_shoup(m.sub(*o, d), w, ws);
        }
    }
    x
}

/// Drop the last limb with rounding (modulus switching), NTT domain in and out.
pub(crate) fn drop_last_limb(lc: &LevelContext, lower: &LevelContext, mut x: RnsPoly) -> RnsPoly {
    debug_assert_eq!(lower.level + 1, lc.level);
    let l = lc.level;
    let n = x.degree();
    let table = lc.q.table(l - 1).clone();
    let ql = table.q();
    let mut last = x.limb(l - 1).to_vec();
    table.inverse(&mut last);
    x.truncate_to(&lower.q);
    let mut tmp = vec![0u64; n];
    for i in 0..l - 1 {
        let m = *lc.q.modulus(i);
        for (o, &v) in tmp.iter_mut().zip(&last) {
            *o = centered_into(v, ql, &m);
        }
        lc.q.table(i).forward(&mut tmp);
        let (w, ws) = lc.last_inv[i];
        for (o, &d) in x.limb_mut(i).iter_mut().zip(&tmp) {
            *o = m.mul_shoup(m.sub(*o, d), w, ws);
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfv::params::{BfvContext, BfvProfile};
    use num_bigint::{BigInt, BigUint};
    use num_integer::Integer;
    use num_traits::{Signed, ToPrimitive, Zero};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn to_big(lc: &LevelContext, residues: &[u64]) -> BigInt {
        let (mag, neg) = lc.crt_centered(residues);
        let b = BigInt::from(mag);
        if neg {
            -b
        } else {
            b
        }
    }

    fn residues(x: &BigInt, primes: &[u64]) -> Vec<u64> {
        primes
            .iter()
            .map(|&p| x.mod_floor(&BigInt::from(p)).to_u64().unwrap())
            .collect()
    }

    #[test]
    fn q_to_aux_extension_is_centered_lift() {
        let ctx = BfvContext::from_profile(BfvProfile::custom("t", 16, 3, 50)).unwrap();
        let lc = ctx.level(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let limbs = (0..3)
            .map(|i| {
                let q = lc.q.modulus(i).value();
                (0..16).map(|_| rng.gen_range(0..q)).collect()
            })
            .collect();
        let x = RnsPoly::from_limbs(&lc.q, limbs, Domain::Coefficient).unwrap();
        let y = extend_q_to_aux(lc, &x);
        let aux = lc.aux.primes();
        for j in 0..16 {
            let r: Vec<u64> = (0..3).map(|i| x.limb(i)[j]).collect();
            let v = to_big(lc, &r);
            let got: Vec<u64> = (0..aux.len()).map(|k| y.limb(k)[j]).collect();
            assert_eq!(got, residues(&v, &aux));
        }
    }

    #[test]
    fn scale_round_matches_big_integer_oracle() {
        let ctx = BfvContext::from_profile(BfvProfile::custom("t", 16, 3, 50)).unwrap();
        let lc = ctx.level(3).unwrap();
        let t = BigInt::from(65537u64);
        let q = BigInt::from(lc.q_big.clone());
        let p: BigInt = lc.aux.primes().iter().map(|&v| BigInt::from(v)).product();
        let bound = &q * &q * BigInt::from(16u32);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let qp_primes = lc.qp.primes();
        for _ in 0..200 {
            // random x with |x| < N Q^2, as produced by a tensor product
            let bits = bound.bits();
            let mag = BigUint::from_bytes_le(
                &(0..(bits / 8 + 1)).map(|_| rng.gen::<u8>()).collect::<Vec<_>>(),
            ) % bound.magnitude();
            let x = if rng.gen() { BigInt::from(mag) } else { -BigInt::from(mag) };
            let limbs: Vec<Vec<u64>> = residues(&x, &qp_primes).into_iter().map(|r| vec![r; 16]).collect();
            let xp = RnsPoly::from_limbs(&lc.qp, limbs, Domain::Coefficient).unwrap();
            let out = scale_round_to_aux(lc, &xp);
            // round(t x / Q), ties never occur for random inputs
            let num = &t * &x;
            let (qt, r) = num.div_mod_floor(&q);
            let rounded = if BigInt::from(2u8) * r >= q { qt + 1 } else { qt };
            let expect = residues(&rounded, &lc.aux.primes());
            let got: Vec<u64> = (0..lc.aux.len()).map(|k| out.limb(k)[0]).collect();
            // fixed-point fractions may be off by one on the rounding
            let diff = residues(&(&rounded + 1), &lc.aux.primes());
            let diff2 = residues(&(&rounded - 1), &lc.aux.primes());
            assert!(got == expect || got == diff || got == diff2);
            assert!(rounded.abs() < &p / 2);
            // and back to Q exactly
            let back = extend_aux_to_q(lc, &out);
            let gotv = to_big(lc, &(0..3).map(|i| back.limb(i)[0]).collect::<Vec<_>>());
            let lifted = to_big_aux(&lc.aux.primes(), &got);
            assert_eq!(gotv.mod_floor(&q), lifted.mod_floor(&q));
        }
    }

    fn to_big_aux(primes: &[u64], r: &[u64]) -> BigInt {
        let p: BigInt = primes.iter().map(|&v| BigInt::from(v)).product();
        let mut acc = BigInt::zero();
        for (&pi, &ri) in primes.iter().zip(r) {
            let pb = BigInt::from(pi);
            let hat = &p / &pb;
            let inv = hat.modpow(&(&pb - 2), &pb);
            acc += BigInt::from(ri) * hat * inv;
        }
        let acc = acc.mod_floor(&p);
        if &acc * 2 > p {
            acc - p
        } else {
            acc
        }
    }
}
