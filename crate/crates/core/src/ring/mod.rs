//! Exact arithmetic in `Z_p` and in `R_q = Z_q[X]/(X^N + 1)` held in RNS form.

pub mod modulus;
pub mod ntt;
pub mod prime;
mod sample;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use modulus::{Modulus, PrimeField};
pub use ntt::NttTable;
pub use sample::{sample, small_coeffs as sample_small, SampleKind, GAUSSIAN_BOUND};

use crate::{Error, Result};

/// Ring degree, limb primes and plaintext field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingParams {
    pub degree: usize,
    pub limb_primes: Vec<u64>,
    pub plain_modulus: PrimeField,
}

impl RingParams {
    pub fn new(degree: usize, limb_primes: Vec<u64>, plain_modulus: u64) -> Result<Self> {
        let p = Self {
            degree,
            limb_primes,
            plain_modulus: PrimeField::new(plain_modulus)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.degree.is_power_of_two() || self.degree < 2 {
            return Err(Error::Parameter(format!(
                "degree {} is not a power of two",
                self.degree
            )));
        }
        let two_n = 2 * self.degree as u64;
        if self.limb_primes.is_empty() {
            return Err(Error::Parameter("empty limb chain".into()));
        }
        for (i, &q) in self.limb_primes.iter().enumerate() {
            if !prime::is_prime(q) || q % two_n != 1 {
                return Err(Error::Parameter(format!(
                    "limb {q} is not a prime ≡ 1 mod {two_n}"
                )));
            }
            if self.limb_primes[..i].contains(&q) {
                return Err(Error::Parameter(format!("duplicate limb {q}")));
            }
        }
        if self.plain_modulus.p() % two_n != 1 {
            return Err(Error::Parameter(format!(
                "plain modulus {} is not 1 mod {two_n}; batching impossible",
                self.plain_modulus.p()
            )));
        }
        Ok(())
    }

    pub fn log_q(&self) -> f64 {
        self.limb_primes.iter().map(|&q| (q as f64).log2()).sum()
    }
}

/// An ordered set of NTT-friendly limb primes sharing one degree.
#[derive(Debug)]
pub struct RnsBasis {
    degree: usize,
    tables: Vec<Arc<NttTable>>,
}

impl RnsBasis {
    pub fn new(degree: usize, primes: &[u64]) -> Result<Arc<Self>> {
        let tables = primes
            .iter()
            .map(|&q| NttTable::new(q, degree).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Ok(Arc::new(Self { degree, tables }))
    }

    /// A basis reusing already-built tables (e.g. a prefix of a chain).
    pub fn from_tables(degree: usize, tables: Vec<Arc<NttTable>>) -> Arc<Self> {
        debug_assert!(tables.iter().all(|t| t.degree() == degree));
        Arc::new(Self { degree, tables })
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    #[inline]
    pub fn modulus(&self, i: usize) -> &Modulus {
        self.tables[i].modulus()
    }

    #[inline]
    pub fn table(&self, i: usize) -> &Arc<NttTable> {
        &self.tables[i]
    }

    pub fn tables(&self) -> &[Arc<NttTable>] {
        &self.tables
    }

    pub fn primes(&self) -> Vec<u64> {
        self.tables.iter().map(|t| t.q()).collect()
    }

    pub fn same_as(&self, other: &RnsBasis) -> bool {
        self.degree == other.degree
            && self.tables.len() == other.tables.len()
            && self
                .tables
                .iter()
                .zip(&other.tables)
                .all(|(a, b)| a.q() == b.q())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Coefficient,
    Ntt,
}

/// Polynomial in RNS form: limb-major flat storage, `len(basis) * N` words.
#[derive(Clone, Debug)]
pub struct RnsPoly {
    basis: Arc<RnsBasis>,
    data: Vec<u64>,
    domain: Domain,
}

impl PartialEq for RnsPoly {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.basis.same_as(&other.basis) && self.data == other.data
    }
}

impl Eq for RnsPoly {}

impl RnsPoly {
    pub fn zero(basis: &Arc<RnsBasis>, domain: Domain) -> Self {
        Self {
            data: vec![0; basis.len() * basis.degree()],
            basis: basis.clone(),
            domain,
        }
    }

    /// Build from per-limb coefficient vectors, validating ranges.
    pub fn from_limbs(basis: &Arc<RnsBasis>, limbs: Vec<Vec<u64>>, domain: Domain) -> Result<Self> {
        if limbs.len() != basis.len() {
            return Err(Error::Parameter(format!(
                "{} limbs for a {}-limb basis",
                limbs.len(),
                basis.len()
            )));
        }
        let n = basis.degree();
        let mut data = Vec::with_capacity(n * limbs.len());
        for (i, l) in limbs.into_iter().enumerate() {
            if l.len() != n {
                return Err(Error::Parameter(format!("limb of length {} != {n}", l.len())));
            }
            let q = basis.modulus(i).value();
            if let Some(bad) = l.iter().find(|&&c| c >= q) {
                return Err(Error::Domain(format!("coefficient {bad} ≥ limb prime {q}")));
            }
            data.extend(l);
        }
        Ok(Self {
            basis: basis.clone(),
            data,
            domain,
        })
    }

    /// Lift signed coefficients into every limb.
    pub fn from_signed(basis: &Arc<RnsBasis>, coeffs: &[i64]) -> Result<Self> {
        let n = basis.degree();
        if coeffs.len() != n {
            return Err(Error::Parameter(format!("{} coefficients != {n}", coeffs.len())));
        }
        let mut p = Self::zero(basis, Domain::Coefficient);
        for i in 0..basis.len() {
            let m = *basis.modulus(i);
            for (d, &c) in p.data[i * n..(i + 1) * n].iter_mut().zip(coeffs) {
                *d = m.reduce_i64(c);
            }
        }
        Ok(p)
    }

    #[inline]
    pub fn basis(&self) -> &Arc<RnsBasis> {
        &self.basis
    }

    #[inline]
    pub fn domain(&self) -> Domain {
        self.domain
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    #[inline]
    pub fn num_limbs(&self) -> usize {
        self.basis.len()
    }

    #[inline]
    pub fn limb(&self, i: usize) -> &[u64] {
        let n = self.degree();
        &self.data[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn limb_mut(&mut self, i: usize) -> &mut [u64] {
        let n = self.degree();
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn limbs(&self) -> impl Iterator<Item = &[u64]> {
        self.data.chunks_exact(self.degree())
    }

    pub fn data(&self) -> &[u64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u64] {
        &mut self.data
    }

    /// Wrap raw limb-major words; the caller guarantees ranges.
    pub(crate) fn from_raw(basis: &Arc<RnsBasis>, data: Vec<u64>, domain: Domain) -> Self {
        debug_assert_eq!(data.len(), basis.len() * basis.degree());
        Self {
            basis: basis.clone(),
            data,
            domain,
        }
    }

    /// Keep the first `k` limbs (moving onto the given prefix basis).
    pub(crate) fn truncate_to(&mut self, basis: &Arc<RnsBasis>) {
        debug_assert!(basis.len() <= self.basis.len());
        self.data.truncate(basis.len() * basis.degree());
        self.basis = basis.clone();
    }

    pub fn ntt_forward(&mut self) -> Result<()> {
        if self.domain != Domain::Coefficient {
            return Err(Error::Domain("forward NTT of an NTT-domain polynomial".into()));
        }
        self.forward_unchecked();
        Ok(())
    }

    pub fn ntt_inverse(&mut self) -> Result<()> {
        if self.domain != Domain::Ntt {
            return Err(Error::Domain(
                "inverse NTT of a coefficient-domain polynomial".into(),
            ));
        }
        self.inverse_unchecked();
        Ok(())
    }

    pub(crate) fn forward_unchecked(&mut self) {
        let n = self.degree();
        let basis = self.basis.clone();
        for (i, limb) in self.data.chunks_exact_mut(n).enumerate() {
            basis.table(i).forward(limb);
        }
        self.domain = Domain::Ntt;
    }

    pub(crate) fn inverse_unchecked(&mut self) {
        let n = self.degree();
        let basis = self.basis.clone();
        for (i, limb) in self.data.chunks_exact_mut(n).enumerate() {
            basis.table(i).inverse(limb);
        }
        self.domain = Domain::Coefficient;
    }

    pub fn to_domain(&mut self, d: Domain) {
        match (self.domain, d) {
            (Domain::Coefficient, Domain::Ntt) => self.forward_unchecked(),
            (Domain::Ntt, Domain::Coefficient) => self.inverse_unchecked(),
            _ => {}
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.basis, &other.basis) && !self.basis.same_as(&other.basis) {
            return Err(Error::Parameter("polynomials over different RNS bases".into()));
        }
        if self.domain != other.domain {
            return Err(Error::Domain("operands in different domains".into()));
        }
        Ok(())
    }

    fn zip_limbs(&mut self, other: &Self, f: impl Fn(&Modulus, u64, u64) -> u64) {
        let n = self.degree();
        let basis = self.basis.clone();
        for (i, (a, b)) in self
            .data
            .chunks_exact_mut(n)
            .zip(other.data.chunks_exact(n))
            .enumerate()
        {
            let m = basis.modulus(i);
            for (x, &y) in a.iter_mut().zip(b) {
                *x = f(m, *x, y);
            }
        }
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        self.zip_limbs(other, |m, a, b| m.add(a, b));
        Ok(())
    }

    pub fn sub_assign(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        self.zip_limbs(other, |m, a, b| m.sub(a, b));
        Ok(())
    }

    /// Pointwise product; both operands must be in the NTT domain.
    pub fn mul_assign_ntt(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        if self.domain != Domain::Ntt {
            return Err(Error::Domain("pointwise product needs NTT domain".into()));
        }
        self.zip_limbs(other, |m, a, b| m.mul(a, b));
        Ok(())
    }

    pub fn neg_assign(&mut self) {
        let n = self.degree();
        let basis = self.basis.clone();
        for (i, a) in self.data.chunks_exact_mut(n).enumerate() {
            let m = basis.modulus(i);
            for x in a.iter_mut() {
                *x = m.neg(*x);
            }
        }
    }

    /// Multiply by a small integer scalar.
    pub fn scale_assign(&mut self, k: i64) {
        let n = self.degree();
        let basis = self.basis.clone();
        for (i, a) in self.data.chunks_exact_mut(n).enumerate() {
            let m = basis.modulus(i);
            let w = m.reduce_i64(k);
            let ws = m.shoup(w);
            for x in a.iter_mut() {
                *x = m.mul_shoup(*x, w, ws);
            }
        }
    }

    /// Per-limb scalar multiply (one scalar per limb).
    pub fn scale_limbs_assign(&mut self, scalars: &[u64]) {
        let n = self.degree();
        let basis = self.basis.clone();
        for (i, a) in self.data.chunks_exact_mut(n).enumerate() {
            let m = basis.modulus(i);
            let w = m.reduce(scalars[i]);
            let ws = m.shoup(w);
            for x in a.iter_mut() {
                *x = m.mul_shoup(*x, w, ws);
            }
        }
    }
}

/// Product in `R_q`; operands may be in either domain, result matches `a`'s domain.
pub fn poly_mul(a: &RnsPoly, b: &RnsPoly) -> Result<RnsPoly> {
    if !a.basis.same_as(&b.basis) {
        return Err(Error::Parameter("poly_mul over different RNS bases".into()));
    }
    let out_domain = a.domain;
    let mut x = a.clone();
    let mut y = b.clone();
    x.to_domain(Domain::Ntt);
    y.to_domain(Domain::Ntt);
    x.zip_limbs(&y, |m, u, v| m.mul(u, v));
    x.to_domain(out_domain);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn basis(n: usize, k: usize) -> Arc<RnsBasis> {
        let primes = prime::primes_below(2 * n as u64, 50, k, &[]).unwrap();
        RnsBasis::new(n, &primes).unwrap()
    }

    fn random_poly(b: &Arc<RnsBasis>, rng: &mut impl Rng) -> RnsPoly {
        let limbs = (0..b.len())
            .map(|i| {
                let q = b.modulus(i).value();
                (0..b.degree()).map(|_| rng.gen_range(0..q)).collect()
            })
            .collect();
        RnsPoly::from_limbs(b, limbs, Domain::Coefficient).unwrap()
    }

    /// O(N^2) negacyclic convolution, written without any NTT machinery.
    fn schoolbook(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
        let n = a.len();
        let mut acc = vec![0i128; n];
        for i in 0..n {
            for j in 0..n {
                let prod = (a[i] as i128 * b[j] as i128) % q as i128;
                if i + j < n {
                    acc[i + j] += prod;
                } else {
                    acc[i + j - n] -= prod;
                }
            }
        }
        acc.into_iter()
            .map(|v| v.rem_euclid(q as i128) as u64)
            .collect()
    }

    #[test]
    fn poly_mul_matches_schoolbook_small_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut trials = 0;
        for &n in &[2usize, 4, 8, 16, 32] {
            let b = basis(n, 2);
            let reps = if n <= 8 { 3000 } else { 2000 };
            for _ in 0..reps {
                let x = random_poly(&b, &mut rng);
                let y = random_poly(&b, &mut rng);
                let z = poly_mul(&x, &y).unwrap();
                for i in 0..b.len() {
                    let q = b.modulus(i).value();
                    assert_eq!(z.limb(i), &schoolbook(x.limb(i), y.limb(i), q)[..]);
                }
                trials += 1;
            }
        }
        assert!(trials >= 10_000);
    }

    #[test]
    fn multiplicative_identity_and_wrap() {
        let n = 16;
        let b = basis(n, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_poly(&b, &mut rng);
        let mut one = vec![0i64; n];
        one[0] = 1;
        let one = RnsPoly::from_signed(&b, &one).unwrap();
        assert_eq!(poly_mul(&a, &one).unwrap(), a);

        let mut xn1 = vec![0i64; n];
        xn1[n - 1] = 1;
        let mut x = vec![0i64; n];
        x[1] = 1;
        let prod = poly_mul(
            &RnsPoly::from_signed(&b, &xn1).unwrap(),
            &RnsPoly::from_signed(&b, &x).unwrap(),
        )
        .unwrap();
        let mut minus_one = vec![0i64; n];
        minus_one[0] = -1;
        assert_eq!(prod, RnsPoly::from_signed(&b, &minus_one).unwrap());
        assert_eq!(prod.limb(0)[0], b.modulus(0).value() - 1);
    }

    #[test]
    fn mismatched_bases_rejected() {
        let a = RnsPoly::zero(&basis(16, 2), Domain::Coefficient);
        let b = RnsPoly::zero(&basis(16, 3), Domain::Coefficient);
        assert!(matches!(poly_mul(&a, &b), Err(Error::Parameter(_))));
    }

    #[test]
    fn wrong_domain_transform_rejected() {
        let mut a = RnsPoly::zero(&basis(16, 2), Domain::Ntt);
        assert!(matches!(a.ntt_forward(), Err(Error::Domain(_))));
        let mut c = RnsPoly::zero(&basis(16, 2), Domain::Coefficient);
        assert!(matches!(c.ntt_inverse(), Err(Error::Domain(_))));
    }

    #[test]
    fn rns_round_trip_and_constant() {
        let b = basis(4096, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_poly(&b, &mut rng);
        let mut t = a.clone();
        t.ntt_forward().unwrap();
        t.ntt_inverse().unwrap();
        assert_eq!(a, t);

        let mut c = vec![0i64; 4096];
        c[0] = 77;
        let mut c = RnsPoly::from_signed(&b, &c).unwrap();
        c.ntt_forward().unwrap();
        assert!(c.data().iter().all(|&v| v == 77));
    }

    #[test]
    fn params_validation() {
        let q = prime::primes_below(2 * 1024, 50, 1, &[]).unwrap()[0];
        assert!(RingParams::new(1024, vec![q], 65537).is_ok());
        assert!(RingParams::new(1000, vec![q], 65537).is_err());
        assert!(RingParams::new(1024, vec![q + 2], 65537).is_err());
        // 65537 ≡ 1 mod 2N only up to N = 32768
        let q2 = prime::primes_below(2 * 65536, 55, 1, &[]).unwrap()[0];
        assert!(RingParams::new(65536, vec![q2], 65537).is_err());
    }
}
