use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_traits::ToPrimitive;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use super::ciphertext::{log_add, Ciphertext};
use super::encoding::{BatchEncoder, Plaintext, PreparedPlaintext, ScaledPlaintext};
use super::keys::{EvaluationKey, KeySwitchKey, PublicKey, SecretKey};
use super::params::{BfvContext, LevelContext};
use super::rns;
use crate::ring::{sample, Domain, RnsPoly, SampleKind};
use crate::{Error, Result};

/// Heuristic noise model, in bits of `|t (c0 + c1 s) mod Q|`. The
/// constants are deliberately pessimistic; tests check the estimate never
/// undershoots the measured noise.
pub(crate) mod noise_model {
    pub fn fresh(t: u64, n: usize) -> f64 {
        (t as f64).log2() + 0.5 * (n as f64).log2() + 6.0
    }
    pub fn plain_mul(t: u64, n: usize) -> f64 {
        (t as f64).log2() + 0.5 * (n as f64).log2()
    }
    pub fn ct_mul(t: u64, n: usize) -> f64 {
        (t as f64).log2() + (n as f64).log2() + 1.0
    }
    pub fn key_switch(t: u64, n: usize) -> f64 {
        (t as f64).log2() + 0.5 * (n as f64).log2() + 6.0
    }
    pub fn rounding(t: u64, n: usize) -> f64 {
        (t as f64).log2() + 0.5 * (n as f64).log2() + 4.0
    }
}

/// Homomorphic operation counters.
#[derive(Debug, Default)]
pub struct OpCounters {
    rotations: AtomicU64,
    ct_ct_muls: AtomicU64,
    ct_pt_muls: AtomicU64,
    additions: AtomicU64,
    key_switches: AtomicU64,
    mod_switches: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub rotations: u64,
    pub ct_ct_muls: u64,
    pub ct_pt_muls: u64,
    pub additions: u64,
    pub key_switches: u64,
    pub mod_switches: u64,
}

impl OpCounts {
    pub fn scaled(&self, k: u64) -> Self {
        Self {
            rotations: self.rotations * k,
            ct_ct_muls: self.ct_ct_muls * k,
            ct_pt_muls: self.ct_pt_muls * k,
            additions: self.additions * k,
            key_switches: self.key_switches * k,
            mod_switches: self.mod_switches * k,
        }
    }

    pub fn total(&self) -> u64 {
        self.rotations + self.ct_ct_muls + self.ct_pt_muls + self.additions + self.mod_switches
    }
}

impl std::ops::Sub for OpCounts {
    type Output = OpCounts;
    fn sub(self, o: Self) -> Self {
        Self {
            rotations: self.rotations - o.rotations,
            ct_ct_muls: self.ct_ct_muls - o.ct_ct_muls,
            ct_pt_muls: self.ct_pt_muls - o.ct_pt_muls,
            additions: self.additions - o.additions,
            key_switches: self.key_switches - o.key_switches,
            mod_switches: self.mod_switches - o.mod_switches,
        }
    }
}

impl OpCounters {
    pub fn snapshot(&self) -> OpCounts {
        OpCounts {
            rotations: self.rotations.load(Ordering::Relaxed),
            ct_ct_muls: self.ct_ct_muls.load(Ordering::Relaxed),
            ct_pt_muls: self.ct_pt_muls.load(Ordering::Relaxed),
            additions: self.additions.load(Ordering::Relaxed),
            key_switches: self.key_switches.load(Ordering::Relaxed),
            mod_switches: self.mod_switches.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        for c in [
            &self.rotations,
            &self.ct_ct_muls,
            &self.ct_pt_muls,
            &self.additions,
            &self.key_switches,
            &self.mod_switches,
        ] {
            c.store(0, Ordering::Relaxed);
        }
    }

    fn bump(c: &AtomicU64) {
        c.fetch_add(1, Ordering::Relaxed);
    }
}

pub struct Encryptor {
    ctx: Arc<BfvContext>,
    pk: PublicKey,
    encoder: BatchEncoder,
}

impl Encryptor {
    pub fn new(ctx: &Arc<BfvContext>, pk: &PublicKey) -> Self {
        Self {
            ctx: ctx.clone(),
            pk: pk.clone(),
            encoder: BatchEncoder::new(ctx),
        }
    }

    pub fn context(&self) -> &Arc<BfvContext> {
        &self.ctx
    }

    pub fn encrypt<R: RngCore>(&self, pt: &Plaintext, rng: &mut R) -> Result<Ciphertext> {
        let lc = self.ctx.top();
        let mut u = sample(&lc.q, SampleKind::Ternary, rng);
        u.forward_unchecked();
        let mut e0 = sample(&lc.q, SampleKind::Gaussian, rng);
        let mut e1 = sample(&lc.q, SampleKind::Gaussian, rng);
        e0.forward_unchecked();
        e1.forward_unchecked();
        let mut c0 = self.pk.b.clone();
        c0.mul_assign_ntt(&u)?;
        c0.add_assign(&e0)?;
        c0.add_assign(&self.encoder.scaled(pt, lc.level)?)?;
        let mut c1 = self.pk.a.clone();
        c1.mul_assign_ntt(&u)?;
        c1.add_assign(&e1)?;
        Ok(Ciphertext {
            polys: vec![c0, c1],
            noise: noise_model::fresh(self.ctx.plain().p(), self.ctx.degree()),
        })
    }

    pub fn encrypt_slots<R: RngCore>(&self, slots: &[u64], rng: &mut R) -> Result<Ciphertext> {
        self.encrypt(&self.encoder.encode(slots)?, rng)
    }
}

pub struct Decryptor {
    ctx: Arc<BfvContext>,
    sk: SecretKey,
    encoder: BatchEncoder,
}

impl Decryptor {
    pub fn new(ctx: &Arc<BfvContext>, sk: &SecretKey) -> Self {
        Self {
            ctx: ctx.clone(),
            sk: sk.clone(),
            encoder: BatchEncoder::new(ctx),
        }
    }

    pub fn context(&self) -> &Arc<BfvContext> {
        &self.ctx
    }

    /// `c0 + c1 s (+ c2 s^2)` in the coefficient domain.
    fn phase(&self, ct: &Ciphertext) -> Result<(RnsPoly, &LevelContext)> {
        let lc = self.ctx.level(ct.level())?;
        let s = self.sk.at_level(&self.ctx, ct.level())?;
        let mut acc = ct.polys[0].clone();
        let mut sp = s.clone();
        for c in &ct.polys[1..] {
            let mut term = c.clone();
            term.mul_assign_ntt(&sp)?;
            acc.add_assign(&term)?;
            sp.mul_assign_ntt(&s)?;
        }
        acc.inverse_unchecked();
        Ok((acc, lc))
    }

    pub fn decrypt(&self, ct: &Ciphertext) -> Result<Plaintext> {
        let (x, lc) = self.phase(ct)?;
        let coeffs = rns::scale_round_to_plain(lc, &x, self.ctx.plain().p());
        Ok(Plaintext { coeffs })
    }

    pub fn decrypt_slots(&self, ct: &Ciphertext) -> Result<Vec<u64>> {
        Ok(self.encoder.decode(&self.decrypt(ct)?))
    }

    /// Measured invariant noise budget in bits; 0 means decryption is no
    /// longer guaranteed.
    pub fn noise_budget(&self, ct: &Ciphertext) -> Result<u32> {
        let (mut x, lc) = self.phase(ct)?;
        let t = self.ctx.plain().p();
        x.scale_assign(t as i64);
        let n = x.degree();
        let l = lc.level;
        let mut max_bits = 0f64;
        let mut res = vec![0u64; l];
        for j in 0..n {
            for (i, r) in res.iter_mut().enumerate() {
                *r = x.limb(i)[j];
            }
            let (mag, _) = lc.crt_centered(&res);
            let b = mag.bits();
            // cheap filter on the bit length before the exact log
            if (b as f64) + 1.0 > max_bits {
                let v = if b > 1000 {
                    b as f64
                } else {
                    mag.to_f64().unwrap_or(f64::MAX).log2()
                };
                if v > max_bits {
                    max_bits = v;
                }
            }
        }
        let budget = lc.log2_q - max_bits - 1.0;
        Ok(if budget <= 0.0 { 0 } else { budget.floor() as u32 })
    }

    pub fn secret_key(&self) -> &SecretKey {
        &self.sk
    }
}

/// A ciphertext multiplied by the special prime, over `Q_l ∪ {P_s}`: a
/// rotation whose key switch has not been divided down yet.
pub struct Raised {
    polys: [RnsPoly; 2],
    noise: f64,
}

impl Raised {
    pub fn level(&self) -> usize {
        self.polys[0].num_limbs() - 1
    }
}

/// Key-switching digits of a polynomial over `Q_l ∪ {P_s}`, NTT domain.
pub struct Decomposed {
    level: usize,
    digits: Vec<RnsPoly>,
}

/// All homomorphic operations; holds only public evaluation material.
pub struct Evaluator {
    ctx: Arc<BfvContext>,
    evk: Arc<EvaluationKey>,
    encoder: BatchEncoder,
    counters: OpCounters,
    strict: bool,
    /// NTT-domain index permutation per Galois element in the key.
    perms: HashMap<u64, Vec<u32>>,
}

impl Evaluator {
    pub fn new(ctx: &Arc<BfvContext>, evk: Arc<EvaluationKey>) -> Self {
        let perms = evk
            .galois
            .keys
            .keys()
            .map(|&g| (g, ctx.galois_permutation(g)))
            .collect();
        Self {
            ctx: ctx.clone(),
            evk,
            encoder: BatchEncoder::new(ctx),
            counters: OpCounters::default(),
            strict: true,
            perms,
        }
    }

    /// Disable the estimator-based depth guard (used to study failures).
    pub fn unchecked(mut self) -> Self {
        self.strict = false;
        self
    }

    pub fn context(&self) -> &Arc<BfvContext> {
        &self.ctx
    }

    pub fn encoder(&self) -> &BatchEncoder {
        &self.encoder
    }

    pub fn evaluation_key(&self) -> &Arc<EvaluationKey> {
        &self.evk
    }

    pub fn counters(&self) -> &OpCounters {
        &self.counters
    }

    fn t(&self) -> u64 {
        self.ctx.plain().p()
    }

    /// Estimated remaining budget in bits.
    pub fn estimated_budget(&self, ct: &Ciphertext) -> f64 {
        let lq = self.ctx.level(ct.level()).map(|l| l.log2_q).unwrap_or(0.0);
        lq - ct.noise - 1.0
    }

    fn guard(&self, ct: Ciphertext, what: &str) -> Result<Ciphertext> {
        if self.strict && self.estimated_budget(&ct) <= 0.0 {
            return Err(Error::DepthExhausted(format!(
                "{what} at level {} leaves no noise budget",
                ct.level()
            )));
        }
        Ok(ct)
    }

    fn same_level(a: &Ciphertext, b: &Ciphertext) -> Result<()> {
        if a.level() != b.level() {
            return Err(Error::Level(format!("{} vs {}", a.level(), b.level())));
        }
        Ok(())
    }

    pub fn add_inplace(&self, a: &mut Ciphertext, b: &Ciphertext) -> Result<()> {
        Self::same_level(a, b)?;
        if a.size() < b.size() {
            let z = RnsPoly::zero(a.polys[0].basis(), Domain::Ntt);
            a.polys.resize(b.size(), z);
        }
        for (x, y) in a.polys.iter_mut().zip(&b.polys) {
            x.add_assign(y)?;
        }
        a.noise = log_add(a.noise, b.noise);
        OpCounters::bump(&self.counters.additions);
        Ok(())
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let mut out = a.clone();
        self.add_inplace(&mut out, b)?;
        Ok(out)
    }

    pub fn sub_inplace(&self, a: &mut Ciphertext, b: &Ciphertext) -> Result<()> {
        Self::same_level(a, b)?;
        if a.size() < b.size() {
            let z = RnsPoly::zero(a.polys[0].basis(), Domain::Ntt);
            a.polys.resize(b.size(), z);
        }
        for (x, y) in a.polys.iter_mut().zip(&b.polys) {
            x.sub_assign(y)?;
        }
        a.noise = log_add(a.noise, b.noise);
        OpCounters::bump(&self.counters.additions);
        Ok(())
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let mut out = a.clone();
        self.sub_inplace(&mut out, b)?;
        Ok(out)
    }

    pub fn negate(&self, a: &Ciphertext) -> Ciphertext {
        let mut out = a.clone();
        for p in &mut out.polys {
            p.neg_assign();
        }
        out
    }

    /// Multiply by a small integer constant (no plaintext encoding needed).
    pub fn mul_scalar(&self, a: &Ciphertext, k: i64) -> Ciphertext {
        let mut out = a.clone();
        for p in &mut out.polys {
            p.scale_assign(k);
        }
        out.noise += (k.unsigned_abs().max(1) as f64).log2();
        out
    }

    pub fn add_plain(&self, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        let mut out = a.clone();
        out.polys[0].add_assign(&self.encoder.scaled(pt, a.level())?)?;
        out.noise = log_add(out.noise, (self.t() as f64).log2());
        OpCounters::bump(&self.counters.additions);
        Ok(out)
    }

    pub fn sub_plain(&self, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        let mut out = a.clone();
        out.polys[0].sub_assign(&self.encoder.scaled(pt, a.level())?)?;
        out.noise = log_add(out.noise, (self.t() as f64).log2());
        OpCounters::bump(&self.counters.additions);
        Ok(out)
    }

    pub fn add_scaled(&self, a: &Ciphertext, pt: &ScaledPlaintext) -> Result<Ciphertext> {
        self.add_scaled_signed(a, pt, false)
    }

    pub fn sub_scaled(&self, a: &Ciphertext, pt: &ScaledPlaintext) -> Result<Ciphertext> {
        self.add_scaled_signed(a, pt, true)
    }

    fn add_scaled_signed(&self, a: &Ciphertext, pt: &ScaledPlaintext, neg: bool) -> Result<Ciphertext> {
        if pt.level() != a.level() {
            return Err(Error::Level(format!(
                "plaintext at level {} vs ciphertext at {}",
                pt.level(),
                a.level()
            )));
        }
        let mut out = a.clone();
        if neg {
            out.polys[0].sub_assign(&pt.poly)?;
        } else {
            out.polys[0].add_assign(&pt.poly)?;
        }
        out.noise = log_add(out.noise, (self.t() as f64).log2());
        OpCounters::bump(&self.counters.additions);
        Ok(out)
    }

    /// `sum_k a_k * pt_k` with one reduction per coefficient. Counts one
    /// plaintext product per term and `terms - 1` additions.
    pub fn dot_plain(&self, terms: &[(&Ciphertext, &PreparedPlaintext)]) -> Result<Ciphertext> {
        let Some(&(first, _)) = terms.first() else {
            return Err(Error::Shape("empty plaintext dot product".into()));
        };
        let level = first.level();
        for (a, pt) in terms {
            if a.level() != level || pt.level() != level || a.size() != first.size() {
                return Err(Error::Level("dot product operands at mixed levels or sizes".into()));
            }
        }
        let lc = self.ctx.level(level)?;
        let n = self.ctx.degree();
        // 60-bit limbs: products stay below 2^120, so 256 fit in a u128
        const CHUNK: usize = 256;
        let jobs: Vec<(usize, usize)> = (0..first.size()).flat_map(|c| (0..level).map(move |i| (c, i))).collect();
        let limbs = crate::par::map(jobs, |(c, i)| {
            let m = lc.q.modulus(i);
            let mut out = vec![0u64; n];
            let mut acc = vec![0u128; n];
            for chunk in terms.chunks(CHUNK) {
                for (a, pt) in chunk {
                    let s = a.polys[c].limb(i);
                    let w = pt.poly.limb(i);
                    for ((o, &x), &y) in acc.iter_mut().zip(s).zip(w) {
                        *o += x as u128 * y as u128;
                    }
                }
                for (o, v) in out.iter_mut().zip(acc.iter_mut()) {
                    *o = m.add(*o, m.reduce_u128(*v));
                    *v = 0;
                }
            }
            out
        });
        let mut polys = Vec::with_capacity(first.size());
        for c in limbs.chunks(level) {
            polys.push(RnsPoly::from_raw(&lc.q, c.concat(), Domain::Ntt));
        }
        let per = noise_model::plain_mul(self.t(), n);
        let noise = terms.iter().map(|(a, _)| a.noise + per).fold(f64::NEG_INFINITY, log_add);
        self.counters.ct_pt_muls.fetch_add(terms.len() as u64, Ordering::Relaxed);
        self.counters.additions.fetch_add(terms.len() as u64 - 1, Ordering::Relaxed);
        self.guard(Ciphertext { polys, noise }, "plaintext dot product")
    }

    pub fn prepare(&self, pt: &Plaintext, level: usize) -> Result<PreparedPlaintext> {
        self.encoder.prepare(pt, level)
    }

    /// Multiply-accumulate `acc += a * pt` without the depth guard; the
    /// caller validates once at the end.
    pub fn mul_plain_acc(&self, acc: &mut Option<Ciphertext>, a: &Ciphertext, pt: &PreparedPlaintext) -> Result<()> {
        if pt.level() != a.level() {
            return Err(Error::Level(format!(
                "plaintext at level {} vs ciphertext at {}",
                pt.level(),
                a.level()
            )));
        }
        OpCounters::bump(&self.counters.ct_pt_muls);
        let noise = a.noise + noise_model::plain_mul(self.t(), self.ctx.degree());
        match acc {
            None => {
                let mut out = a.clone();
                for p in &mut out.polys {
                    p.mul_assign_ntt(&pt.poly)?;
                }
                out.noise = noise;
                *acc = Some(out);
            }
            Some(o) => {
                Self::same_level(o, a)?;
                let basis = a.polys[0].basis().clone();
                for (dst, src) in o.polys.iter_mut().zip(&a.polys) {
                    for i in 0..basis.len() {
                        let m = *basis.modulus(i);
                        let w = pt.poly.limb(i);
                        let s = src.limb(i);
                        let d = dst.limb_mut(i);
                        for ((o, &x), &y) in d.iter_mut().zip(s).zip(w) {
                            *o = m.reduce_u128(*o as u128 + x as u128 * y as u128);
                        }
                    }
                }
                o.noise = log_add(o.noise, noise);
                OpCounters::bump(&self.counters.additions);
            }
        }
        Ok(())
    }

    pub fn mul_plain(&self, a: &Ciphertext, pt: &PreparedPlaintext) -> Result<Ciphertext> {
        let mut acc = None;
        self.mul_plain_acc(&mut acc, a, pt)?;
        self.guard(acc.unwrap(), "plaintext multiplication")
    }

    /// Encode-and-multiply convenience.
    pub fn mul_plain_slots(&self, a: &Ciphertext, slots: &[u64]) -> Result<Ciphertext> {
        let pt = self.encoder.encode(slots)?;
        let prepared = self.encoder.prepare(&pt, a.level())?;
        self.mul_plain(a, &prepared)
    }

    fn extend_component(&self, lc: &LevelContext, c: &RnsPoly) -> RnsPoly {
        let mut coef = c.clone();
        coef.inverse_unchecked();
        let mut ext = rns::extend_q_to_aux(lc, &coef);
        ext.forward_unchecked();
        let mut data = c.data().to_vec();
        data.extend_from_slice(ext.data());
        RnsPoly::from_raw(&lc.qp, data, Domain::Ntt)
    }

    fn rescale_component(&self, lc: &LevelContext, mut d: RnsPoly) -> RnsPoly {
        d.inverse_unchecked();
        let y = rns::scale_round_to_aux(lc, &d);
        let mut out = rns::extend_aux_to_q(lc, &y);
        out.forward_unchecked();
        out
    }

    /// Tensor product without relinearization (3 components).
    pub fn mul_no_relin(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        Self::same_level(a, b)?;
        if a.size() != 2 || b.size() != 2 {
            return Err(Error::Parameter("multiplication needs 2-component inputs".into()));
        }
        let lc = self.ctx.level(a.level())?;
        let square = a == b;
        let a0 = self.extend_component(lc, &a.polys[0]);
        let a1 = self.extend_component(lc, &a.polys[1]);
        let (b0, b1) = if square {
            (a0.clone(), a1.clone())
        } else {
            (
                self.extend_component(lc, &b.polys[0]),
                self.extend_component(lc, &b.polys[1]),
            )
        };
        let mut d0 = a0.clone();
        d0.mul_assign_ntt(&b0)?;
        let mut d2 = a1.clone();
        d2.mul_assign_ntt(&b1)?;
        let mut d1 = a0;
        d1.mul_assign_ntt(&b1)?;
        if square {
            let d = d1.clone();
            d1.add_assign(&d)?;
        } else {
            let mut x = a1;
            x.mul_assign_ntt(&b0)?;
            d1.add_assign(&x)?;
        }
        let polys = vec![
            self.rescale_component(lc, d0),
            self.rescale_component(lc, d1),
            self.rescale_component(lc, d2),
        ];
        OpCounters::bump(&self.counters.ct_ct_muls);
        Ok(Ciphertext {
            polys,
            noise: a.noise.max(b.noise) + noise_model::ct_mul(self.t(), self.ctx.degree()),
        })
    }

    pub fn relinearize(&self, a: &Ciphertext) -> Result<Ciphertext> {
        if a.size() == 2 {
            return Ok(a.clone());
        }
        if a.size() != 3 {
            return Err(Error::Parameter(format!("cannot relinearize {} components", a.size())));
        }
        let lc = self.ctx.level(a.level())?;
        let dec = self.decompose(lc, &a.polys[2]);
        let (k0, k1) = self.key_switch_inner(lc, &dec, &self.evk.relin.0, None)?;
        let mut c0 = a.polys[0].clone();
        c0.add_assign(&k0)?;
        let mut c1 = a.polys[1].clone();
        c1.add_assign(&k1)?;
        Ok(Ciphertext {
            polys: vec![c0, c1],
            noise: log_add(a.noise, noise_model::key_switch(self.t(), self.ctx.degree())),
        })
    }

    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let t = self.mul_no_relin(a, b)?;
        let r = self.relinearize(&t)?;
        self.guard(r, "multiplication")
    }

    /// `sum_k a_k * b_k` with a single relinearization at the end.
    pub fn mul_sum(&self, pairs: &[(&Ciphertext, &Ciphertext)]) -> Result<Ciphertext> {
        let mut acc: Option<Ciphertext> = None;
        for (a, b) in pairs {
            let t = self.mul_no_relin(a, b)?;
            match &mut acc {
                None => acc = Some(t),
                Some(s) => self.add_inplace(s, &t)?,
            }
        }
        let acc = acc.ok_or_else(|| Error::Shape("empty product sum".into()))?;
        let r = self.relinearize(&acc)?;
        self.guard(r, "multiplication")
    }

    pub fn square(&self, a: &Ciphertext) -> Result<Ciphertext> {
        self.mul(a, a)
    }

    /// Digit decomposition of `c` (NTT domain over `Q_l`).
    pub fn decompose(&self, lc: &LevelContext, c: &RnsPoly) -> Decomposed {
        let l = lc.level;
        let n = self.ctx.degree();
        let ks = &lc.ks;
        let jobs: Vec<usize> = (0..l).collect();
        let digits = crate::par::map(jobs, |j| {
            let mut coef = c.limb(j).to_vec();
            lc.q.table(j).inverse(&mut coef);
            let qj = lc.q.modulus(j).value();
            let mut data = vec![0u64; (l + 1) * n];
            for i in 0..=l {
                let dst = &mut data[i * n..(i + 1) * n];
                if i == j {
                    dst.copy_from_slice(c.limb(j));
                    continue;
                }
                let m = ks.modulus(i);
                if m.value() > qj {
                    dst.copy_from_slice(&coef);
                } else {
                    for (o, &v) in dst.iter_mut().zip(&coef) {
                        *o = m.reduce(v);
                    }
                }
                ks.table(i).forward(dst);
            }
            RnsPoly::from_raw(ks, data, Domain::Ntt)
        });
        Decomposed { level: l, digits }
    }

    /// Inner product of digits with a key, optionally through a Galois
    /// permutation, over `Q_l ∪ {P_s}` (not yet divided by `P_s`).
    fn key_switch_raw(
        &self,
        lc: &LevelContext,
        dec: &Decomposed,
        key: &KeySwitchKey,
        perm: Option<&[u32]>,
    ) -> Result<(RnsPoly, RnsPoly)> {
        let l = lc.level;
        if dec.level != l {
            return Err(Error::Level("decomposition level mismatch".into()));
        }
        let n = self.ctx.degree();
        let top = self.ctx.max_level();
        let limbs: Vec<usize> = (0..=l).collect();
        // accumulators for a block of coefficients stay in L1
        const BLOCK: usize = 256;
        let parts = crate::par::map(limbs, |i| {
            let key_limb = if i == l { top } else { i };
            let m = *lc.ks.modulus(i);
            let ds: Vec<&[u64]> = dec.digits.iter().map(|d| d.limb(i)).collect();
            let bs: Vec<&[u64]> = key.b[..l].iter().map(|b| b.limb(key_limb)).collect();
            let as_: Vec<&[u64]> = key.a[..l].iter().map(|a| a.limb(key_limb)).collect();
            let mut r0 = vec![0u64; n];
            let mut r1 = vec![0u64; n];
            let mut acc0 = [0u128; BLOCK];
            let mut acc1 = [0u128; BLOCK];
            let mut gathered = [0u64; BLOCK];
            for start in (0..n).step_by(BLOCK) {
                let end = (start + BLOCK).min(n);
                let w = end - start;
                acc0[..w].fill(0);
                acc1[..w].fill(0);
                for j in 0..l {
                    let d: &[u64] = match perm {
                        Some(p) => {
                            for (g, &px) in gathered[..w].iter_mut().zip(&p[start..end]) {
                                *g = ds[j][px as usize];
                            }
                            &gathered[..w]
                        }
                        None => &ds[j][start..end],
                    };
                    let b = &bs[j][start..end];
                    let a = &as_[j][start..end];
                    for x in 0..w {
                        let dv = d[x] as u128;
                        acc0[x] += dv * b[x] as u128;
                        acc1[x] += dv * a[x] as u128;
                    }
                }
                for x in 0..w {
                    r0[start + x] = m.reduce_u128(acc0[x]);
                    r1[start + x] = m.reduce_u128(acc1[x]);
                }
            }
            (r0, r1)
        });
        let mut d0 = Vec::with_capacity((l + 1) * n);
        let mut d1 = Vec::with_capacity((l + 1) * n);
        for (a, b) in parts {
            d0.extend(a);
            d1.extend(b);
        }
        OpCounters::bump(&self.counters.key_switches);
        Ok((
            RnsPoly::from_raw(&lc.ks, d0, Domain::Ntt),
            RnsPoly::from_raw(&lc.ks, d1, Domain::Ntt),
        ))
    }

    fn key_switch_inner(
        &self,
        lc: &LevelContext,
        dec: &Decomposed,
        key: &KeySwitchKey,
        perm: Option<&[u32]>,
    ) -> Result<(RnsPoly, RnsPoly)> {
        let (k0, k1) = self.key_switch_raw(lc, dec, key, perm)?;
        Ok((rns::mod_down_special(lc, k0), rns::mod_down_special(lc, k1)))
    }

    /// `P_s * c` over `Q_l ∪ {P_s}` (the special limb is zero).
    fn raise_poly(lc: &LevelContext, c: &RnsPoly, perm: Option<&[u32]>) -> RnsPoly {
        let l = lc.level;
        let n = c.degree();
        let sp = lc.ks.modulus(l).value();
        let mut data = vec![0u64; (l + 1) * n];
        for i in 0..l {
            let m = lc.q.modulus(i);
            let w = m.reduce(sp);
            let ws = m.shoup(w);
            let src = c.limb(i);
            let dst = &mut data[i * n..(i + 1) * n];
            match perm {
                Some(p) => {
                    for (o, &px) in dst.iter_mut().zip(p) {
                        *o = m.mul_shoup(src[px as usize], w, ws);
                    }
                }
                None => {
                    for (o, &v) in dst.iter_mut().zip(src) {
                        *o = m.mul_shoup(v, w, ws);
                    }
                }
            }
        }
        RnsPoly::from_raw(&lc.ks, data, Domain::Ntt)
    }

    /// Rotations that skip the final division by the special prime, for a
    /// caller that multiplies them by plaintexts and sums before dividing
    /// once (see [`Evaluator::dot_plain_raised`]). Step 0 is `P_s * a`.
    pub fn rotate_hoisted_raised(&self, a: &Ciphertext, steps: &[i64]) -> Result<Vec<Raised>> {
        if a.size() != 2 {
            return Err(Error::Parameter("rotation needs a relinearized ciphertext".into()));
        }
        let lc = self.ctx.level(a.level())?;
        let mut keys = Vec::with_capacity(steps.len());
        for &s in steps {
            keys.push(if self.is_identity_step(s) { None } else { Some(self.galois_key(s)?) });
        }
        let dec = if keys.iter().any(Option::is_some) {
            Some(self.decompose(lc, &a.polys[1]))
        } else {
            None
        };
        let ks_noise = noise_model::key_switch(self.t(), self.ctx.degree());
        keys.into_iter()
            .map(|k| match (k, &dec) {
                (Some((key, g)), Some(dec)) => {
                    let perm = &self.perms[&g];
                    let (mut k0, k1) = self.key_switch_raw(lc, dec, key, Some(perm))?;
                    k0.add_assign(&Self::raise_poly(lc, &a.polys[0], Some(perm)))?;
                    OpCounters::bump(&self.counters.rotations);
                    Ok(Raised {
                        polys: [k0, k1],
                        noise: log_add(a.noise, ks_noise),
                    })
                }
                _ => Ok(Raised {
                    polys: [
                        Self::raise_poly(lc, &a.polys[0], None),
                        Self::raise_poly(lc, &a.polys[1], None),
                    ],
                    noise: a.noise,
                }),
            })
            .collect()
    }

    /// `sum_k r_k * pt_k` over `Q_l ∪ {P_s}`, then one division by `P_s`.
    /// Plaintexts must be prepared over the same extended basis.
    pub fn dot_plain_raised(&self, terms: &[(&Raised, &PreparedPlaintext)]) -> Result<Ciphertext> {
        let Some(&(first, _)) = terms.first() else {
            return Err(Error::Shape("empty plaintext dot product".into()));
        };
        let level = first.level();
        if terms.iter().any(|(r, pt)| r.level() != level || pt.poly.num_limbs() != level + 1) {
            return Err(Error::Level("raised dot product operands at mixed levels".into()));
        }
        let lc = self.ctx.level(level)?;
        let n = self.ctx.degree();
        const CHUNK: usize = 256;
        let jobs: Vec<(usize, usize)> = (0..2).flat_map(|c| (0..=level).map(move |i| (c, i))).collect();
        let limbs = crate::par::map(jobs, |(c, i)| {
            let m = lc.ks.modulus(i);
            let mut out = vec![0u64; n];
            let mut acc = vec![0u128; n];
            for chunk in terms.chunks(CHUNK) {
                for (r, pt) in chunk {
                    for ((o, &x), &y) in acc.iter_mut().zip(r.polys[c].limb(i)).zip(pt.poly.limb(i)) {
                        *o += x as u128 * y as u128;
                    }
                }
                for (o, v) in out.iter_mut().zip(acc.iter_mut()) {
                    *o = m.add(*o, m.reduce_u128(*v));
                    *v = 0;
                }
            }
            out
        });
        let mut polys = Vec::with_capacity(2);
        for c in limbs.chunks(level + 1) {
            let raised = RnsPoly::from_raw(&lc.ks, c.concat(), Domain::Ntt);
            polys.push(rns::mod_down_special(lc, raised));
        }
        let per = noise_model::plain_mul(self.t(), n);
        let noise = terms.iter().map(|(r, _)| r.noise + per).fold(f64::NEG_INFINITY, log_add);
        self.counters.ct_pt_muls.fetch_add(terms.len() as u64, Ordering::Relaxed);
        self.counters.additions.fetch_add(terms.len() as u64 - 1, Ordering::Relaxed);
        self.guard(Ciphertext { polys, noise }, "plaintext dot product")
    }

    fn galois_key(&self, step: i64) -> Result<(&KeySwitchKey, u64)> {
        let g = self.ctx.galois_element(step);
        if !self.evk.galois.has_step(step) {
            return Err(Error::MissingKey(step));
        }
        let key = self.evk.galois.keys.get(&g).ok_or(Error::MissingKey(step))?;
        Ok((key, g))
    }

    fn is_identity_step(&self, step: i64) -> bool {
        step.rem_euclid(self.ctx.row_size() as i64) == 0
    }

    /// Rotate every batching row left by `step` columns.
    pub fn rotate(&self, a: &Ciphertext, step: i64) -> Result<Ciphertext> {
        if self.is_identity_step(step) {
            return Ok(a.clone());
        }
        let lc = self.ctx.level(a.level())?;
        let dec = self.decompose(lc, &a.polys[1]);
        self.rotate_decomposed(a, &dec, step)
    }

    /// Several rotations of one ciphertext sharing a single decomposition.
    pub fn rotate_hoisted(&self, a: &Ciphertext, steps: &[i64]) -> Result<Vec<Ciphertext>> {
        if a.size() != 2 {
            return Err(Error::Parameter("rotation needs a relinearized ciphertext".into()));
        }
        for &s in steps {
            if !self.is_identity_step(s) {
                self.galois_key(s)?;
            }
        }
        let lc = self.ctx.level(a.level())?;
        let dec = if steps.iter().any(|&s| !self.is_identity_step(s)) {
            Some(self.decompose(lc, &a.polys[1]))
        } else {
            None
        };
        steps
            .iter()
            .map(|&s| match &dec {
                Some(d) if !self.is_identity_step(s) => self.rotate_decomposed(a, d, s),
                _ => Ok(a.clone()),
            })
            .collect()
    }

    fn rotate_decomposed(&self, a: &Ciphertext, dec: &Decomposed, step: i64) -> Result<Ciphertext> {
        if a.size() != 2 {
            return Err(Error::Parameter("rotation needs a relinearized ciphertext".into()));
        }
        let (key, g) = self.galois_key(step)?;
        let lc = self.ctx.level(a.level())?;
        let perm = &self.perms[&g];
        let (k0, k1) = self.key_switch_inner(lc, dec, key, Some(perm))?;
        let mut c0 = RnsPoly::zero(&lc.q, Domain::Ntt);
        for i in 0..lc.level {
            let src = a.polys[0].limb(i);
            for (o, &p) in c0.limb_mut(i).iter_mut().zip(perm) {
                *o = src[p as usize];
            }
        }
        c0.add_assign(&k0)?;
        OpCounters::bump(&self.counters.rotations);
        Ok(Ciphertext {
            polys: vec![c0, k1],
            noise: log_add(a.noise, noise_model::key_switch(self.t(), self.ctx.degree())),
        })
    }

    /// Drop limbs down to `level` (divide-and-round by each dropped prime).
    pub fn mod_switch_to(&self, a: &Ciphertext, level: usize) -> Result<Ciphertext> {
        if level > a.level() || level == 0 {
            return Err(Error::Level(format!(
                "cannot switch from level {} to {level}",
                a.level()
            )));
        }
        let mut out = a.clone();
        while out.level() > level {
            let l = out.level();
            let lc = self.ctx.level(l)?;
            let lower = self.ctx.level(l - 1)?;
            out.polys = out
                .polys
                .into_iter()
                .map(|p| rns::drop_last_limb(lc, lower, p))
                .collect();
            let q_last = (lc.q.modulus(l - 1).value() as f64).log2();
            out.noise = log_add(
                out.noise - q_last,
                noise_model::rounding(self.t(), self.ctx.degree()),
            );
            OpCounters::bump(&self.counters.mod_switches);
        }
        Ok(out)
    }
}
