use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest modulus supported by the lazy (Harvey) NTT butterflies: values
/// up to `4q` must fit in a `u64`.
pub const MAX_MODULUS_BITS: u32 = 62;

/// An odd word-sized modulus with precomputed Barrett constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Modulus {
    value: u64,
    /// floor(2^128 / value), split into (low, high) words.
    ratio: (u64, u64),
}

impl Modulus {
    pub fn new(value: u64) -> Result<Self> {
        if value < 2 || 64 - value.leading_zeros() > MAX_MODULUS_BITS {
            return Err(Error::Parameter(format!(
                "modulus {value} outside [2, 2^{MAX_MODULUS_BITS})"
            )));
        }
        let ratio = u128::MAX / value as u128;
        Ok(Self {
            value,
            ratio: (ratio as u64, (ratio >> 64) as u64),
        })
    }

    #[inline(always)]
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn bits(&self) -> u32 {
        64 - self.value.leading_zeros()
    }

    /// Barrett reduction of a 128-bit value.
    #[inline(always)]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let x0 = x as u64;
        let x1 = (x >> 64) as u64;
        let (r0, r1) = self.ratio;
        let carry = ((x0 as u128 * r0 as u128) >> 64) as u64;
        let t = x0 as u128 * r1 as u128 + carry as u128;
        let tmp1 = t as u64;
        let tmp3 = (t >> 64) as u64;
        let t2 = x1 as u128 * r0 as u128 + tmp1 as u128;
        let carry2 = (t2 >> 64) as u64;
        let quot = x1
            .wrapping_mul(r1)
            .wrapping_add(tmp3)
            .wrapping_add(carry2);
        let mut r = x0.wrapping_sub(quot.wrapping_mul(self.value));
        while r >= self.value {
            r -= self.value;
        }
        r
    }

    #[inline(always)]
    pub fn reduce(&self, x: u64) -> u64 {
        if x < self.value {
            x
        } else {
            self.reduce_u128(x as u128)
        }
    }

    /// Reduce a signed integer into `[0, value)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        let r = self.reduce(x.unsigned_abs());
        if x < 0 && r != 0 {
            self.value - r
        } else {
            r
        }
    }

    #[inline(always)]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.value {
            s - self.value
        } else {
            s
        }
    }

    #[inline(always)]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.value - b
        }
    }

    #[inline(always)]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    #[inline(always)]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        base = self.reduce(base);
        let mut acc = 1 % self.value;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse by the extended Euclidean algorithm; works for any modulus
    /// coprime to `a`.
    pub fn inv(&self, a: u64) -> Result<u64> {
        let a = self.reduce(a);
        if a == 0 {
            return Err(Error::Domain("inverse of zero".into()));
        }
        let (mut r0, mut r1) = (self.value as i128, a as i128);
        let (mut s0, mut s1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (s0, s1) = (s1, s0 - q * s1);
        }
        if r0 != 1 {
            return Err(Error::Domain(format!(
                "{a} is not invertible modulo {}",
                self.value
            )));
        }
        Ok(s0.rem_euclid(self.value as i128) as u64)
    }

    /// Shoup precomputation `floor(w * 2^64 / q)` for a fixed multiplicand `w < q`.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        debug_assert!(w < self.value);
        (((w as u128) << 64) / self.value as u128) as u64
    }

    /// `a * w mod q` in `[0, 2q)`, valid for any `a < 2^64`.
    #[inline(always)]
    pub fn mul_shoup_lazy(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
        a.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(self.value))
    }

    #[inline(always)]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let r = self.mul_shoup_lazy(a, w, w_shoup);
        if r >= self.value {
            r - self.value
        } else {
            r
        }
    }

    /// Centered representative in `(-q/2, q/2]`.
    #[inline(always)]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.value / 2 {
            a as i64 - self.value as i64
        } else {
            a as i64
        }
    }
}

/// The plaintext prime field `F_p` (or one RNS limb viewed as a field).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct PrimeField {
    modulus: Modulus,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if !super::prime::is_prime(p) {
            return Err(Error::Parameter(format!("{p} is not prime")));
        }
        Ok(Self {
            modulus: Modulus::new(p)?,
        })
    }

    #[inline(always)]
    pub fn p(&self) -> u64 {
        self.modulus.value()
    }

    #[inline(always)]
    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn element(&self, x: u64) -> Result<u64> {
        if x >= self.p() {
            Err(Error::Domain(format!("{x} is not an element of F_{}", self.p())))
        } else {
            Ok(x)
        }
    }

    #[inline(always)]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        self.modulus.add(a, b)
    }

    #[inline(always)]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        self.modulus.sub(a, b)
    }

    #[inline(always)]
    pub fn neg(&self, a: u64) -> u64 {
        self.modulus.neg(a)
    }

    #[inline(always)]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.modulus.mul(a, b)
    }

    pub fn pow(&self, a: u64, e: u64) -> u64 {
        self.modulus.pow(a, e)
    }

    pub fn inv(&self, a: u64) -> Result<u64> {
        self.modulus.inv(a)
    }

    /// Signed lift into `(-p/2, p/2]`.
    pub fn lift_signed(&self, a: u64) -> i64 {
        self.modulus.center(a)
    }

    pub fn from_signed(&self, a: i64) -> u64 {
        self.modulus.reduce_i64(a)
    }
}

impl TryFrom<u64> for PrimeField {
    type Error = Error;
    fn try_from(p: u64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<PrimeField> for u64 {
    fn from(f: PrimeField) -> u64 {
        f.p()
    }
}
