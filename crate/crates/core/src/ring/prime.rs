//! Primality testing and NTT-friendly prime search.

use crate::{Error, Result};

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for all 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Primes `q ≡ 1 (mod step)` strictly below `2^bits`, largest first.
pub fn primes_below(step: u64, bits: u32, count: usize, exclude: &[u64]) -> Result<Vec<u64>> {
    let top = 1u64 << bits;
    let mut k = (top - 1) / step;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if k == 0 {
            return Err(Error::Parameter(format!(
                "not enough primes ≡ 1 mod {step} below 2^{bits}"
            )));
        }
        let q = k * step + 1;
        if q < top && is_prime(q) && !exclude.contains(&q) {
            out.push(q);
        }
        k -= 1;
    }
    Ok(out)
}

/// Primes `q ≡ 1 (mod step)` strictly above `2^bits`, smallest first.
pub fn primes_above(step: u64, bits: u32, count: usize, exclude: &[u64]) -> Result<Vec<u64>> {
    let bottom = 1u64 << bits;
    let mut k = bottom / step + 1;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let q = k
            .checked_mul(step)
            .and_then(|v| v.checked_add(1))
            .ok_or_else(|| Error::Parameter("prime search overflowed".into()))?;
        if q > bottom && is_prime(q) && !exclude.contains(&q) {
            out.push(q);
        }
        k += 1;
    }
    Ok(out)
}
