use std::sync::Arc;

use super::params::BfvContext;
use crate::ring::{Domain, NttTable, RnsPoly};
use crate::{Error, Result};

/// A plaintext polynomial with coefficients mod `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plaintext {
    pub(crate) coeffs: Vec<u64>,
}

impl Plaintext {
    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn from_coeffs(ctx: &BfvContext, coeffs: Vec<u64>) -> Result<Self> {
        if coeffs.len() != ctx.degree() {
            return Err(Error::Shape(format!(
                "{} coefficients for degree {}",
                coeffs.len(),
                ctx.degree()
            )));
        }
        let t = ctx.plain().p();
        if let Some(c) = coeffs.iter().find(|&&c| c >= t) {
            return Err(Error::Domain(format!("coefficient {c} ≥ t = {t}")));
        }
        Ok(Self { coeffs })
    }
}

/// A plaintext lifted (centered) into `Q_l` and transformed, ready for
/// repeated plaintext-ciphertext products.
#[derive(Clone, Debug)]
pub struct PreparedPlaintext {
    pub(crate) poly: RnsPoly,
}

impl PreparedPlaintext {
    pub fn level(&self) -> usize {
        self.poly.num_limbs()
    }
}

/// SIMD encoding: slot `(r, c)` of the `2 x N/2` matrix sits at the
/// evaluation point `psi^(±3^c)`.
pub struct BatchEncoder {
    ctx: Arc<BfvContext>,
}

impl BatchEncoder {
    pub fn new(ctx: &Arc<BfvContext>) -> Self {
        Self { ctx: ctx.clone() }
    }

    /// Encode up to `N` slot values (missing tail is zero).
    pub fn encode(&self, slots: &[u64]) -> Result<Plaintext> {
        let n = self.ctx.degree();
        let t = self.ctx.plain().p();
        if slots.len() > n {
            return Err(Error::Shape(format!("{} slots > {n}", slots.len())));
        }
        let mut v = vec![0u64; n];
        let map = self.ctx.slot_to_ntt();
        for (i, &s) in slots.iter().enumerate() {
            if s >= t {
                return Err(Error::Domain(format!("slot value {s} ≥ t = {t}")));
            }
            v[map[i]] = s;
        }
        self.ctx.plain_table().inverse(&mut v);
        Ok(Plaintext { coeffs: v })
    }

    /// Encode signed values, reducing mod `t`.
    pub fn encode_signed(&self, slots: &[i64]) -> Result<Plaintext> {
        let f = self.ctx.plain();
        let v: Vec<u64> = slots.iter().map(|&x| f.from_signed(x)).collect();
        self.encode(&v)
    }

    pub fn decode(&self, pt: &Plaintext) -> Vec<u64> {
        let mut v = pt.coeffs.clone();
        self.ctx.plain_table().forward(&mut v);
        self.ctx.slot_to_ntt().iter().map(|&j| v[j]).collect()
    }

    /// Lift into `Q_l` (centered representatives) and NTT.
    pub fn prepare(&self, pt: &Plaintext, level: usize) -> Result<PreparedPlaintext> {
        let lc = self.ctx.level(level)?;
        let t = self.ctx.plain_modulus();
        let signed: Vec<i64> = pt.coeffs.iter().map(|&c| t.center(c)).collect();
        let mut poly = RnsPoly::from_signed(&lc.q, &signed)?;
        poly.forward_unchecked();
        Ok(PreparedPlaintext { poly })
    }

    /// `Delta * m` in `Q_l`, NTT domain.
    pub(crate) fn scaled(&self, pt: &Plaintext, level: usize) -> Result<RnsPoly> {
        let lc = self.ctx.level(level)?;
        let n = self.ctx.degree();
        let mut poly = RnsPoly::zero(&lc.q, Domain::Coefficient);
        for i in 0..level {
            let m = *lc.q.modulus(i);
            let (d, ds) = lc.delta[i];
            for (o, &c) in poly.limb_mut(i).iter_mut().zip(&pt.coeffs) {
                *o = m.mul_shoup(c, d, ds);
            }
        }
        debug_assert_eq!(poly.data().len(), n * level);
        poly.forward_unchecked();
        Ok(poly)
    }

    pub fn scale(&self, pt: &Plaintext, level: usize) -> Result<ScaledPlaintext> {
        Ok(ScaledPlaintext {
            poly: self.scaled(pt, level)?,
        })
    }

    pub fn context(&self) -> &Arc<BfvContext> {
        &self.ctx
    }
}

/// `Delta * m` over `Q_l`, NTT domain; added to or subtracted from `c0`.
#[derive(Clone, Debug)]
pub struct ScaledPlaintext {
    pub(crate) poly: RnsPoly,
}

impl ScaledPlaintext {
    pub fn level(&self) -> usize {
        self.poly.num_limbs()
    }
}

/// Encoder for slot vectors that repeat with period `m` along each row,
/// identical in both rows.
///
/// Such a vector is fixed by rotation by `m`, so its polynomial lives in
/// `Z_t[X^s]` with `s = N / 2m`: `2m` coefficients. Evaluating at the big
/// transform's points collapses to a `2m`-point transform whose output
/// `k` fills the contiguous run `[k s, (k + 1) s)`.
pub struct PeriodicEncoder {
    ctx: Arc<BfvContext>,
    period: usize,
    stride: usize,
    plain: NttTable,
    limbs: Vec<NttTable>,
    /// Small-transform index -> column within the period.
    cols: Vec<usize>,
}

impl PeriodicEncoder {
    pub fn new(ctx: &Arc<BfvContext>, period: usize) -> Result<Self> {
        let n = ctx.degree();
        if !period.is_power_of_two() || 2 * period > n {
            return Err(Error::Parameter(format!(
                "period {period} must be a power of two dividing {}",
                n / 2
            )));
        }
        let m2 = 2 * period;
        let stride = n / m2;
        let small = |tb: &NttTable| {
            let m = *tb.modulus();
            NttTable::with_psi(m, m2, m.pow(tb.psi(), stride as u64))
        };
        let plain = small(ctx.plain_table())?;
        // `Q_top` followed by the special prime
        let limbs = ctx
            .key_basis()
            .tables()
            .iter()
            .map(|tb| small(tb))
            .collect::<Result<Vec<_>>>()?;
        let mut ntt_to_slot = vec![0usize; n];
        for (slot, &j) in ctx.slot_to_ntt().iter().enumerate() {
            ntt_to_slot[j] = slot;
        }
        let row = ctx.row_size();
        let cols = (0..m2).map(|k| ntt_to_slot[k * stride] % row % period).collect();
        Ok(Self {
            ctx: ctx.clone(),
            period,
            stride,
            plain,
            limbs,
            cols,
        })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// The `2m` coefficients (mod `t`) of the sparse polynomial.
    fn sparse(&self, values: &[u64]) -> Result<Vec<u64>> {
        if values.len() != self.period {
            return Err(Error::Shape(format!("{} values for period {}", values.len(), self.period)));
        }
        let t = self.ctx.plain().p();
        if let Some(v) = values.iter().find(|&&v| v >= t) {
            return Err(Error::Domain(format!("slot value {v} ≥ t = {t}")));
        }
        let mut a: Vec<u64> = self.cols.iter().map(|&c| values[c]).collect();
        self.plain.inverse(&mut a);
        Ok(a)
    }

    pub fn encode(&self, values: &[u64]) -> Result<Plaintext> {
        let a = self.sparse(values)?;
        let mut coeffs = vec![0u64; self.ctx.degree()];
        for (k, &c) in a.iter().enumerate() {
            coeffs[k * self.stride] = c;
        }
        Ok(Plaintext { coeffs })
    }

    /// Small transform per limb, each output repeated `stride` times.
    fn expand(
        &self,
        level: usize,
        raised: bool,
        lift: impl Fn(usize, &crate::ring::Modulus) -> Vec<u64>,
    ) -> Result<RnsPoly> {
        let lc = self.ctx.level(level)?;
        let basis = if raised { &lc.ks } else { &lc.q };
        let special = self.limbs.len() - 1;
        let mut poly = RnsPoly::zero(basis, Domain::Ntt);
        for i in 0..basis.len() {
            let m = basis.modulus(i);
            let mut small = lift(i, m);
            self.limbs[if i < level { i } else { special }].forward(&mut small);
            for (run, &v) in poly.limb_mut(i).chunks_exact_mut(self.stride).zip(&small) {
                run.fill(v);
            }
        }
        Ok(poly)
    }

    pub fn prepare(&self, values: &[u64], level: usize) -> Result<PreparedPlaintext> {
        let a = self.sparse(values)?;
        let t = self.ctx.plain_modulus();
        let signed: Vec<i64> = a.iter().map(|&c| t.center(c)).collect();
        let poly = self.expand(level, false, |_, m| signed.iter().map(|&c| m.reduce_i64(c)).collect())?;
        Ok(PreparedPlaintext { poly })
    }

    /// Like [`PeriodicEncoder::prepare`], over `Q_l` and the special prime,
    /// for [`Evaluator::dot_plain_raised`](super::Evaluator::dot_plain_raised).
    pub fn prepare_raised(&self, values: &[u64], level: usize) -> Result<PreparedPlaintext> {
        let a = self.sparse(values)?;
        let t = self.ctx.plain_modulus();
        let signed: Vec<i64> = a.iter().map(|&c| t.center(c)).collect();
        let poly = self.expand(level, true, |_, m| signed.iter().map(|&c| m.reduce_i64(c)).collect())?;
        Ok(PreparedPlaintext { poly })
    }

    pub fn scaled(&self, values: &[u64], level: usize) -> Result<ScaledPlaintext> {
        let a = self.sparse(values)?;
        let lc = self.ctx.level(level)?;
        let poly = self.expand(level, false, |i, m| {
            let (d, ds) = lc.delta[i];
            a.iter().map(|&c| m.mul_shoup(c, d, ds)).collect()
        })?;
        Ok(ScaledPlaintext { poly })
    }
}

/// Plaintext rotation oracle: rotate each batching row left by `step`.
pub fn rotate_slots(slots: &[u64], step: i64) -> Vec<u64> {
    let n = slots.len();
    let row = n / 2;
    let k = step.rem_euclid(row as i64) as usize;
    let mut out = vec![0u64; n];
    for r in 0..2 {
        for c in 0..row {
            out[r * row + c] = slots[r * row + (c + k) % row];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfv::params::BfvProfile;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn encode_decode_bijection() {
        let ctx = BfvContext::from_profile(BfvProfile::custom("t", 1024, 1, 50)).unwrap();
        let enc = BatchEncoder::new(&ctx);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let v: Vec<u64> = (0..1024).map(|_| rng.gen_range(0..65537)).collect();
            assert_eq!(enc.decode(&enc.encode(&v).unwrap()), v);
        }
    }

    #[test]
    fn constant_slots_encode_to_constant_poly() {
        let ctx = BfvContext::from_profile(BfvProfile::custom("t", 64, 1, 50)).unwrap();
        let enc = BatchEncoder::new(&ctx);
        let pt = enc.encode(&[7; 64]).unwrap();
        assert_eq!(pt.coeffs[0], 7);
        assert!(pt.coeffs[1..].iter().all(|&c| c == 0));
    }

    #[test]
    fn slot_product_is_poly_product() {
        // slotwise product must equal the negacyclic product mod t
        let ctx = BfvContext::from_profile(BfvProfile::custom("t", 32, 1, 50)).unwrap();
        let enc = BatchEncoder::new(&ctx);
        let t = 65537u64;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a: Vec<u64> = (0..32).map(|_| rng.gen_range(0..t)).collect();
        let b: Vec<u64> = (0..32).map(|_| rng.gen_range(0..t)).collect();
        let pa = enc.encode(&a).unwrap();
        let pb = enc.encode(&b).unwrap();
        let mut prod = vec![0i128; 32];
        for i in 0..32 {
            for j in 0..32 {
                let v = pa.coeffs[i] as i128 * pb.coeffs[j] as i128;
                if i + j < 32 {
                    prod[i + j] += v;
                } else {
                    prod[i + j - 32] -= v;
                }
            }
        }
        let pc = Plaintext {
            coeffs: prod.iter().map(|v| v.rem_euclid(t as i128) as u64).collect(),
        };
        let got = enc.decode(&pc);
        for i in 0..32 {
            assert_eq!(got[i], a[i] * b[i] % t);
        }
    }

    #[test]
    fn periodic_encoder_matches_full_encoder() {
        let ctx = BfvContext::from_profile(BfvProfile::custom("t", 1024, 2, 50)).unwrap();
        let enc = BatchEncoder::new(&ctx);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for period in [1usize, 2, 8, 64, 512] {
            let pe = PeriodicEncoder::new(&ctx, period).unwrap();
            let v: Vec<u64> = (0..period).map(|_| rng.gen_range(0..65537)).collect();
            let full: Vec<u64> = (0..1024).map(|i| v[i % 512 % period]).collect();
            let pt = enc.encode(&full).unwrap();
            assert_eq!(pe.encode(&v).unwrap(), pt, "period {period}");
            for level in 1..=2 {
                assert_eq!(pe.prepare(&v, level).unwrap().poly, enc.prepare(&pt, level).unwrap().poly);
                assert_eq!(pe.scaled(&v, level).unwrap().poly, enc.scaled(&pt, level).unwrap());
            }
        }
        assert!(PeriodicEncoder::new(&ctx, 1024).is_err());
        assert!(PeriodicEncoder::new(&ctx, 12).is_err());
    }

    #[test]
    fn rotation_oracle() {
        let v: Vec<u64> = (0..8).collect();
        assert_eq!(rotate_slots(&v, 1), vec![1, 2, 3, 0, 5, 6, 7, 4]);
        assert_eq!(rotate_slots(&v, -1), vec![3, 0, 1, 2, 7, 4, 5, 6]);
    }
}
