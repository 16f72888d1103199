use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::params::BfvContext;
use crate::par;
use crate::ring::{sample, Domain, RnsPoly, SampleKind};
use crate::xof::Xof;
use crate::{Error, Result};

/// Ternary secret, kept in the NTT domain over `Q_L ∪ {P_s}`.
#[derive(Clone)]
pub struct SecretKey {
    pub(crate) coeffs: Vec<i8>,
    pub(crate) ntt: RnsPoly,
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

impl SecretKey {
    pub(crate) fn from_coeffs(ctx: &BfvContext, coeffs: Vec<i8>) -> Result<Self> {
        if coeffs.len() != ctx.degree() || coeffs.iter().any(|c| !(-1..=1).contains(c)) {
            return Err(Error::Format("secret key is not a ternary vector of length N".into()));
        }
        let wide: Vec<i64> = coeffs.iter().map(|&c| c as i64).collect();
        let mut ntt = RnsPoly::from_signed(ctx.key_basis(), &wide)?;
        ntt.forward_unchecked();
        Ok(Self { coeffs, ntt })
    }

    pub fn coeffs(&self) -> &[i8] {
        &self.coeffs
    }

    /// The first `level` limbs of `s`, NTT domain.
    pub(crate) fn at_level(&self, ctx: &BfvContext, level: usize) -> Result<RnsPoly> {
        let lc = ctx.level(level)?;
        let mut p = self.ntt.clone();
        p.truncate_to(&lc.q);
        Ok(p)
    }
}

/// `(b, a)` with `b + a s = e`, top level, NTT domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    pub(crate) b: RnsPoly,
    pub(crate) a: RnsPoly,
}

/// Hybrid key-switching key with one digit per chain limb. The uniform
/// halves are regenerated from `a_seed`, so only `b` travels.
#[derive(Clone, Debug)]
pub struct KeySwitchKey {
    pub(crate) a_seed: [u8; 32],
    pub(crate) b: Vec<RnsPoly>,
    pub(crate) a: Vec<RnsPoly>,
}

impl PartialEq for KeySwitchKey {
    fn eq(&self, other: &Self) -> bool {
        self.a_seed == other.a_seed && self.b == other.b
    }
}

impl KeySwitchKey {
    pub(crate) fn expand_a(ctx: &BfvContext, a_seed: &[u8; 32]) -> Vec<RnsPoly> {
        (0..ctx.max_level())
            .map(|j| {
                let mut x = Xof::new(b"HHE-KSK-A", &[a_seed, &(j as u64).to_le_bytes()]);
                sample(ctx.key_basis(), SampleKind::Uniform, &mut x)
            })
            .collect()
    }

    /// Key switching `target -> s`, `target` in the NTT domain over the key basis.
    fn generate(ctx: &BfvContext, sk: &SecretKey, target: &RnsPoly, a_seed: [u8; 32], noise: &mut Xof) -> Self {
        let a = Self::expand_a(ctx, &a_seed);
        let kb = ctx.key_basis();
        let sp = ctx.special_prime();
        let mut b = Vec::with_capacity(a.len());
        for (j, aj) in a.iter().enumerate() {
            let mut e = sample(kb, SampleKind::Gaussian, noise);
            e.forward_unchecked();
            let mut bj = aj.clone();
            bj.mul_assign_ntt(&sk.ntt).unwrap();
            bj.neg_assign();
            bj.add_assign(&e).unwrap();
            let m = *kb.modulus(j);
            let f = m.reduce(sp);
            let fs = m.shoup(f);
            let tgt = target.limb(j).to_vec();
            for (o, &v) in bj.limb_mut(j).iter_mut().zip(&tgt) {
                *o = m.add(*o, m.mul_shoup(v, f, fs));
            }
            b.push(bj);
        }
        Self { a_seed, b, a }
    }

    pub(crate) fn from_parts(ctx: &BfvContext, a_seed: [u8; 32], b: Vec<RnsPoly>) -> Self {
        let a = Self::expand_a(ctx, &a_seed);
        Self { a_seed, b, a }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelinKey(pub(crate) KeySwitchKey);

/// Rotation keys indexed by Galois element, with the declared steps.
#[derive(Clone, Debug, PartialEq)]
pub struct GaloisKeys {
    pub(crate) steps: BTreeSet<i64>,
    pub(crate) keys: BTreeMap<u64, KeySwitchKey>,
}

impl GaloisKeys {
    pub fn steps(&self) -> &BTreeSet<i64> {
        &self.steps
    }

    pub fn has_step(&self, step: i64) -> bool {
        self.steps.contains(&step)
    }
}

/// Public evaluation material: relinearization and rotation keys.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationKey {
    pub relin: RelinKey,
    pub galois: GaloisKeys,
}

#[derive(Clone, Debug)]
pub struct HeKeys {
    pub secret: SecretKey,
    pub public: PublicKey,
    pub evk: EvaluationKey,
}

fn normalize_steps(ctx: &BfvContext, steps: &BTreeSet<i64>) -> Result<BTreeSet<i64>> {
    let row = ctx.row_size() as i64;
    let half = ctx.degree() as i64 / 2;
    let mut out = BTreeSet::new();
    for &s in steps {
        if s <= -half || s >= half {
            return Err(Error::Parameter(format!(
                "rotation step {s} outside (-{half}, {half})"
            )));
        }
        if s.rem_euclid(row) != 0 {
            out.insert(s);
        }
    }
    Ok(out)
}

/// Generate all keys deterministically from `seed`.
pub fn keygen(ctx: &Arc<BfvContext>, rotation_steps: &BTreeSet<i64>, seed: &[u8; 32]) -> Result<HeKeys> {
    let steps = normalize_steps(ctx, rotation_steps)?;
    let n = ctx.degree();
    let kb = ctx.key_basis();

    let mut sx = Xof::from_seed(seed, "secret");
    let coeffs: Vec<i8> = crate::ring::sample_small(n, SampleKind::Ternary, &mut sx)
        .into_iter()
        .map(|c| c as i8)
        .collect();
    let secret = SecretKey::from_coeffs(ctx, coeffs)?;

    // public key over Q_L only
    let top = ctx.top();
    let s_top = secret.at_level(ctx, ctx.max_level())?;
    let a = sample(&top.q, SampleKind::Uniform, &mut Xof::from_seed(seed, "pk-a"));
    let mut e = sample(&top.q, SampleKind::Gaussian, &mut Xof::from_seed(seed, "pk-e"));
    e.forward_unchecked();
    let mut b = a.clone();
    b.mul_assign_ntt(&s_top)?;
    b.neg_assign();
    b.add_assign(&e)?;
    let public = PublicKey { b, a };

    let mut seeds = Xof::from_seed(seed, "ksk-seeds");
    let mut next_seed = || {
        let mut s = [0u8; 32];
        rand_core::RngCore::fill_bytes(&mut seeds, &mut s);
        s
    };

    let mut s2 = secret.ntt.clone();
    s2.mul_assign_ntt(&secret.ntt)?;
    let relin = RelinKey(KeySwitchKey::generate(
        ctx,
        &secret,
        &s2,
        next_seed(),
        &mut Xof::from_seed(seed, "relin-e"),
    ));

    let jobs: Vec<(i64, u64, [u8; 32])> = steps
        .iter()
        .map(|&s| (s, ctx.galois_element(s), next_seed()))
        .collect();
    let built = par::map(jobs, |(step, g, a_seed)| {
        let perm = ctx.galois_permutation(g);
        let mut target = RnsPoly::zero(kb, Domain::Ntt);
        for i in 0..kb.len() {
            let src = secret.ntt.limb(i);
            for (o, &p) in target.limb_mut(i).iter_mut().zip(&perm) {
                *o = src[p as usize];
            }
        }
        let mut noise = Xof::new(b"HHE-GALOIS-E", &[seed, &step.to_le_bytes()]);
        (g, KeySwitchKey::generate(ctx, &secret, &target, a_seed, &mut noise))
    });
    let keys = built.into_iter().collect();

    Ok(HeKeys {
        secret,
        public,
        evk: EvaluationKey {
            relin,
            galois: GaloisKeys { steps, keys },
        },
    })
}
