use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ring::ntt::bit_reverse;
use crate::ring::prime::{primes_above, primes_below};
use crate::ring::{Modulus, NttTable, PrimeField, RingParams, RnsBasis};
use crate::{Error, Result};

/// Named parameter sets. The chain was sized from measured noise: the
/// transciphering circuit plus one linear layer consume about 270 bits
/// of the ~330-bit fresh budget; log QP = 421 stays under the 438-bit
/// bound for 128-bit security at N = 16384.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BfvProfile {
    pub name: &'static str,
    pub degree: usize,
    pub plain: u64,
    pub limbs: usize,
    pub limb_bits: u32,
}

pub const PAPER_16384: BfvProfile = BfvProfile {
    name: "paper-16384",
    degree: 16384,
    plain: 65537,
    limbs: 6,
    limb_bits: 60,
};

/// Same chain as `PAPER_16384` at half the degree. Fast, but log QP
/// is about twice the 128-bit bound for N = 8192; tests only.
pub const TEST_8192: BfvProfile = BfvProfile {
    name: "test-8192",
    degree: 8192,
    plain: 65537,
    limbs: 6,
    limb_bits: 60,
};

pub const PROFILES: [BfvProfile; 2] = [PAPER_16384, TEST_8192];

impl BfvProfile {
    pub fn by_name(name: &str) -> Result<Self> {
        PROFILES
            .iter()
            .find(|p| p.name == name)
            .copied()
            .ok_or_else(|| Error::Parameter(format!("unknown profile {name:?}")))
    }

    pub fn id(&self) -> u8 {
        PROFILES.iter().position(|p| p.name == self.name).unwrap_or(255) as u8
    }

    pub fn custom(name: &'static str, degree: usize, limbs: usize, limb_bits: u32) -> Self {
        Self {
            name,
            degree,
            plain: 65537,
            limbs,
            limb_bits,
        }
    }
}

/// Constants for `round(t * x / Q) mod m` from the residues of `x`:
/// `t * [Qhat_i^-1]_{q_i} * extra / q_i = omega_i + theta_i`.
#[derive(Debug)]
pub(crate) struct ScaleRound {
    /// `theta_i * 2^64`
    pub theta: Vec<u64>,
}

fn frac64(num: &BigUint, den: u64) -> u64 {
    let r = (num % den).to_u64().unwrap();
    (((r as u128) << 64) / den as u128) as u64
}

fn big_mod(x: &BigUint, m: u64) -> u64 {
    (x % m).to_u64().unwrap()
}

/// Per-level precomputation for a chain prefix `Q_l = q_0 ... q_{l-1}`.
#[derive(Debug)]
pub struct LevelContext {
    pub level: usize,
    pub q: Arc<RnsBasis>,
    /// `Q_l` followed by the key-switching special prime.
    pub ks: Arc<RnsBasis>,
    /// HPS auxiliary basis `P` of `l + 1` primes.
    pub aux: Arc<RnsBasis>,
    /// `Q_l ∪ P`, used for the tensor product.
    pub qp: Arc<RnsBasis>,
    pub log2_q: f64,
    pub(crate) q_big: BigUint,
    /// CRT reconstruction terms `Qhat_i * [Qhat_i^-1]_{q_i}`.
    pub(crate) crt_terms: Vec<BigUint>,
    /// `[Qhat_i^-1]_{q_i}` with Shoup companions.
    pub(crate) qhat_inv: Vec<(u64, u64)>,
    /// `[Qhat_i]_{p_k}` indexed `[k][i]`.
    pub(crate) qhat_mod_aux: Vec<Vec<u64>>,
    pub(crate) q_mod_aux: Vec<u64>,
    pub(crate) q_inv_f64: Vec<f64>,
    /// Decryption: `omega_i mod t` and fractional parts for `round(t x / Q)`.
    pub(crate) dec_omega: Vec<u64>,
    pub(crate) dec: ScaleRound,
    /// Tensor rescale: `omega_i mod p_k` indexed `[k][i]`, fractions per `i`.
    pub(crate) mul_omega: Vec<Vec<u64>>,
    pub(crate) mul: ScaleRound,
    /// Coefficient of the `p_k` residue in the rescaled value, mod `p_k`.
    pub(crate) mul_aux_coef: Vec<(u64, u64)>,
    /// Exact `P -> Q` extension.
    pub(crate) phat_inv: Vec<(u64, u64)>,
    pub(crate) phat_mod_q: Vec<Vec<u64>>,
    pub(crate) p_mod_q: Vec<u64>,
    pub(crate) p_inv_f64: Vec<f64>,
    /// `P_s^-1 mod q_i`.
    pub(crate) special_inv: Vec<(u64, u64)>,
    /// `q_{l-1}^-1 mod q_i` for `i < l - 1` (modulus switching).
    pub(crate) last_inv: Vec<(u64, u64)>,
    /// `Delta mod q_i = -t^-1 mod q_i` (since `Q_l ≡ 1 mod t`).
    pub(crate) delta: Vec<(u64, u64)>,
}

#[derive(Debug)]
pub struct BfvContext {
    pub profile: BfvProfile,
    pub params: RingParams,
    plain_table: NttTable,
    special: Arc<NttTable>,
    key_basis: Arc<RnsBasis>,
    levels: Vec<LevelContext>,
    /// Batching: slot index -> index into the mod-t NTT vector.
    slot_to_ntt: Vec<usize>,
    hash: [u8; 32],
}

impl BfvContext {
    pub fn from_profile(profile: BfvProfile) -> Result<Arc<Self>> {
        let n = profile.degree;
        let t = profile.plain;
        let two_n = 2 * n as u64;
        if profile.limbs < 1 {
            return Err(Error::Parameter("profile needs at least one limb".into()));
        }
        // Q ≡ 1 mod t keeps Delta = (Q - 1) / t exact at every level.
        let q_primes = primes_below(two_n * t, profile.limb_bits, profile.limbs, &[])?;
        let special = primes_above(two_n, profile.limb_bits + 1, 1, &q_primes)?[0];
        let mut used = q_primes.clone();
        used.push(special);
        let aux = primes_above(two_n, profile.limb_bits, profile.limbs + 1, &used)?;
        Self::build(profile, q_primes, aux, special)
    }

    fn build(profile: BfvProfile, q_primes: Vec<u64>, aux_primes: Vec<u64>, special: u64) -> Result<Arc<Self>> {
        let n = profile.degree;
        let t = profile.plain;
        let params = RingParams::new(n, q_primes.clone(), t)?;
        let plain_table = NttTable::new(t, n)?;
        let q_tables: Vec<Arc<NttTable>> = q_primes
            .iter()
            .map(|&q| NttTable::new(q, n).map(Arc::new))
            .collect::<Result<_>>()?;
        let aux_tables: Vec<Arc<NttTable>> = aux_primes
            .iter()
            .map(|&q| NttTable::new(q, n).map(Arc::new))
            .collect::<Result<_>>()?;
        let special_table = Arc::new(NttTable::new(special, n)?);
        let mut key_tables = q_tables.clone();
        key_tables.push(special_table.clone());
        let key_basis = RnsBasis::from_tables(n, key_tables);

        let mut levels = Vec::with_capacity(q_primes.len());
        for l in 1..=q_primes.len() {
            levels.push(Self::build_level(
                n,
                t,
                &q_tables[..l],
                &aux_tables[..l + 1],
                &special_table,
            )?);
        }

        let log_n = n.trailing_zeros();
        let row = n / 2;
        let mut slot_to_ntt = vec![0usize; n];
        let mut g = 1usize;
        for c in 0..row {
            for (r, e) in [(0, g), (1, 2 * n - g)] {
                slot_to_ntt[r * row + c] = bit_reverse((e - 1) / 2, log_n);
            }
            g = g * 3 % (2 * n);
        }

        let mut h = Sha256::new();
        h.update(b"HHE-BFV-PARAMS");
        h.update(profile.name.as_bytes());
        h.update((n as u64).to_le_bytes());
        h.update(t.to_le_bytes());
        for q in q_primes.iter().chain(&aux_primes).chain([&special]) {
            h.update(q.to_le_bytes());
        }
        let hash = h.finalize().into();

        Ok(Arc::new(Self {
            profile,
            params,
            plain_table,
            special: special_table,
            key_basis,
            levels,
            slot_to_ntt,
            hash,
        }))
    }

    fn build_level(
        n: usize,
        t: u64,
        q: &[Arc<NttTable>],
        aux: &[Arc<NttTable>],
        special: &Arc<NttTable>,
    ) -> Result<LevelContext> {
        let l = q.len();
        let qs: Vec<u64> = q.iter().map(|x| x.q()).collect();
        let ps: Vec<u64> = aux.iter().map(|x| x.q()).collect();
        let q_big: BigUint = qs.iter().map(|&x| BigUint::from(x)).product();
        let p_big: BigUint = ps.iter().map(|&x| BigUint::from(x)).product();
        let tb = BigUint::from(t);

        let mut crt_terms = Vec::with_capacity(l);
        let mut qhat_inv = Vec::with_capacity(l);
        let mut dec_omega = Vec::with_capacity(l);
        let mut dec_theta = Vec::with_capacity(l);
        let mut mul_theta = Vec::with_capacity(l);
        let mut mul_omega_i = Vec::with_capacity(l);
        for (i, &qi) in qs.iter().enumerate() {
            let m = q[i].modulus();
            let qhat = &q_big / qi;
            let inv = m.inv(big_mod(&qhat, qi))?;
            crt_terms.push(&qhat * inv);
            qhat_inv.push((inv, m.shoup(inv)));

            let num = &tb * inv;
            dec_omega.push(big_mod(&(&num / qi), t));
            dec_theta.push(frac64(&num, qi));

            // t * P * [(Q P / q_i)^-1]_{q_i} / q_i
            let qp_hat_inv = m.inv(big_mod(&(&qhat * &p_big), qi))?;
            let num = &tb * &p_big * qp_hat_inv;
            mul_theta.push(frac64(&num, qi));
            mul_omega_i.push(&num / qi);
        }

        let qp_big = &q_big * &p_big;
        let mut qhat_mod_aux = Vec::with_capacity(ps.len());
        let mut mul_omega = Vec::with_capacity(ps.len());
        let mut mul_aux_coef = Vec::with_capacity(ps.len());
        let mut phat_inv = Vec::with_capacity(ps.len());
        let mut p_inv_f64 = Vec::with_capacity(ps.len());
        for (k, &pk) in ps.iter().enumerate() {
            let m = aux[k].modulus();
            qhat_mod_aux.push(qs.iter().map(|&qi| big_mod(&(&q_big / qi), pk)).collect());
            mul_omega.push(mul_omega_i.iter().map(|w| big_mod(w, pk)).collect());
            let phat = &p_big / pk;
            let inv = m.inv(big_mod(&(&qp_big / pk), pk))?;
            let coef = big_mod(&(&tb * &phat * inv), pk);
            mul_aux_coef.push((coef, m.shoup(coef)));
            let pinv = m.inv(big_mod(&phat, pk))?;
            phat_inv.push((pinv, m.shoup(pinv)));
            p_inv_f64.push(1.0 / pk as f64);
        }
        let phat_mod_q = qs
            .iter()
            .map(|&qi| ps.iter().map(|&pk| big_mod(&(&p_big / pk), qi)).collect())
            .collect();
        let p_mod_q = qs.iter().map(|&qi| big_mod(&p_big, qi)).collect();
        let q_mod_aux = ps.iter().map(|&pk| big_mod(&q_big, pk)).collect();
        let q_inv_f64 = qs.iter().map(|&qi| 1.0 / qi as f64).collect();

        let sp = special.q();
        let special_inv = q
            .iter()
            .map(|tb| {
                let m = tb.modulus();
                let v = m.inv(sp % m.value()).unwrap();
                (v, m.shoup(v))
            })
            .collect();
        let last_inv = if l >= 2 {
            q[..l - 1]
                .iter()
                .map(|tb| {
                    let m = tb.modulus();
                    let v = m.inv(qs[l - 1] % m.value()).unwrap();
                    (v, m.shoup(v))
                })
                .collect()
        } else {
            Vec::new()
        };
        let delta = q
            .iter()
            .map(|tb| {
                let m = tb.modulus();
                let v = m.neg(m.inv(t).unwrap());
                (v, m.shoup(v))
            })
            .collect();

        let mut ks_tables = q.to_vec();
        ks_tables.push(special.clone());
        let mut qp_tables = q.to_vec();
        qp_tables.extend(aux.iter().cloned());
        Ok(LevelContext {
            level: l,
            q: RnsBasis::from_tables(n, q.to_vec()),
            ks: RnsBasis::from_tables(n, ks_tables),
            aux: RnsBasis::from_tables(n, aux.to_vec()),
            qp: RnsBasis::from_tables(n, qp_tables),
            log2_q: qs.iter().map(|&x| (x as f64).log2()).sum(),
            q_big,
            crt_terms,
            qhat_inv,
            qhat_mod_aux,
            q_mod_aux,
            q_inv_f64,
            dec_omega,
            dec: ScaleRound { theta: dec_theta },
            mul_omega,
            mul: ScaleRound { theta: mul_theta },
            mul_aux_coef,
            phat_inv,
            phat_mod_q,
            p_mod_q,
            p_inv_f64,
            special_inv,
            last_inv,
            delta,
        })
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.profile.degree
    }

    #[inline]
    pub fn slots(&self) -> usize {
        self.profile.degree
    }

    /// Columns per batching row; rotations act within a row.
    #[inline]
    pub fn row_size(&self) -> usize {
        self.profile.degree / 2
    }

    #[inline]
    pub fn plain(&self) -> PrimeField {
        self.params.plain_modulus
    }

    pub fn plain_modulus(&self) -> &Modulus {
        self.plain_table.modulus()
    }

    pub(crate) fn plain_table(&self) -> &NttTable {
        &self.plain_table
    }

    pub(crate) fn slot_to_ntt(&self) -> &[usize] {
        &self.slot_to_ntt
    }

    pub fn max_level(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> Result<&LevelContext> {
        if l == 0 || l > self.levels.len() {
            return Err(Error::Level(format!(
                "level {l} outside 1..={}",
                self.levels.len()
            )));
        }
        Ok(&self.levels[l - 1])
    }

    pub fn top(&self) -> &LevelContext {
        self.levels.last().unwrap()
    }

    pub fn key_basis(&self) -> &Arc<RnsBasis> {
        &self.key_basis
    }

    pub fn special_prime(&self) -> u64 {
        self.special.q()
    }

    pub fn params_hash(&self) -> [u8; 32] {
        self.hash
    }

    /// Galois element for a left rotation by `step` columns.
    pub fn galois_element(&self, step: i64) -> u64 {
        let row = self.row_size() as i64;
        let k = step.rem_euclid(row) as u64;
        let m = 2 * self.degree() as u64;
        let mut g = 1u64;
        let mut b = 3u64;
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                g = g * b % m;
            }
            b = b * b % m;
            e >>= 1;
        }
        g
    }

    /// Permutation realizing `X -> X^g` on NTT-domain vectors:
    /// `out[i] = in[perm[i]]`.
    pub(crate) fn galois_permutation(&self, g: u64) -> Vec<u32> {
        let n = self.degree();
        let log_n = n.trailing_zeros();
        let m = 2 * n as u64;
        (0..n)
            .map(|i| {
                let e = 2 * bit_reverse(i, log_n) as u64 + 1;
                let e2 = e * g % m;
                bit_reverse(((e2 - 1) / 2) as usize, log_n) as u32
            })
            .collect()
    }

    /// `Q_l` as a big integer and its bit length (diagnostics).
    pub fn modulus_big(&self, l: usize) -> Result<BigUint> {
        Ok(self.level(l)?.q_big.clone())
    }
}

impl LevelContext {
    /// Centered residue of a CRT value, as a big integer magnitude and sign.
    pub(crate) fn crt_centered(&self, residues: &[u64]) -> (BigUint, bool) {
        let mut acc = BigUint::zero();
        for (r, term) in residues.iter().zip(&self.crt_terms) {
            acc += term * *r;
        }
        acc %= &self.q_big;
        let half = &self.q_big >> 1;
        if acc > half {
            (&self.q_big - acc, true)
        } else {
            (acc, false)
        }
    }

}
