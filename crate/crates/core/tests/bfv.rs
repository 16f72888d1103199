use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hhe_core::bfv::*;
use hhe_core::Error;

const T: u64 = 65537;

struct Fixture {
    ctx: Arc<BfvContext>,
    keys: HeKeys,
    enc: Encryptor,
    dec: Decryptor,
    ev: Evaluator,
}

fn fixture(profile: BfvProfile, steps: &[i64]) -> Fixture {
    let ctx = BfvContext::from_profile(profile).unwrap();
    let steps: BTreeSet<i64> = steps.iter().copied().collect();
    let keys = keygen(&ctx, &steps, &[7; 32]).unwrap();
    Fixture {
        enc: Encryptor::new(&ctx, &keys.public),
        dec: Decryptor::new(&ctx, &keys.secret),
        ev: Evaluator::new(&ctx, Arc::new(keys.evk.clone())),
        ctx,
        keys,
    }
}

fn small() -> Fixture {
    fixture(BfvProfile::custom("small", 2048, 4, 60), &[1, -1, 2, 5, -5, 17])
}

fn random_slots(n: usize, rng: &mut impl Rng) -> Vec<u64> {
    (0..n).map(|_| rng.gen_range(0..T)).collect()
}

#[test]
fn zero_and_small_vectors_round_trip() {
    let f = small();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ct = f.enc.encrypt_slots(&[], &mut rng).unwrap();
    assert!(f.dec.decrypt_slots(&ct).unwrap().iter().all(|&v| v == 0));
    let ct = f.enc.encrypt_slots(&[1, 2, 3], &mut rng).unwrap();
    let out = f.dec.decrypt_slots(&ct).unwrap();
    assert_eq!(&out[..4], &[1, 2, 3, 0]);
}

#[test]
fn fresh_randomness_differs_but_decrypts_equal() {
    let f = small();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v = random_slots(2048, &mut rng);
    let a = f.enc.encrypt_slots(&v, &mut rng).unwrap();
    let b = f.enc.encrypt_slots(&v, &mut rng).unwrap();
    assert_ne!(a, b);
    assert_eq!(f.dec.decrypt_slots(&a).unwrap(), v);
    assert_eq!(f.dec.decrypt_slots(&b).unwrap(), v);
}

#[test]
fn many_random_vectors_round_trip() {
    let f = small();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let v = random_slots(2048, &mut rng);
        let ct = f.enc.encrypt_slots(&v, &mut rng).unwrap();
        assert_eq!(f.dec.decrypt_slots(&ct).unwrap(), v);
    }
}

#[test]
fn additive_homomorphism() {
    let f = small();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let u = random_slots(2048, &mut rng);
        let v = random_slots(2048, &mut rng);
        let cu = f.enc.encrypt_slots(&u, &mut rng).unwrap();
        let cv = f.enc.encrypt_slots(&v, &mut rng).unwrap();
        let s = f.dec.decrypt_slots(&f.ev.add(&cu, &cv).unwrap()).unwrap();
        let d = f.dec.decrypt_slots(&f.ev.sub(&cu, &cv).unwrap()).unwrap();
        let n = f.dec.decrypt_slots(&f.ev.negate(&cu)).unwrap();
        let pt = f.ev.encoder().encode(&v).unwrap();
        let ap = f.dec.decrypt_slots(&f.ev.add_plain(&cu, &pt).unwrap()).unwrap();
        for i in 0..2048 {
            assert_eq!(s[i], (u[i] + v[i]) % T);
            assert_eq!(d[i], (u[i] + T - v[i]) % T);
            assert_eq!(n[i], (T - u[i]) % T);
            assert_eq!(ap[i], (u[i] + v[i]) % T);
        }
    }
    let u = random_slots(2048, &mut rng);
    let cu = f.enc.encrypt_slots(&u, &mut rng).unwrap();
    let zero = f.enc.encrypt_slots(&[], &mut rng).unwrap();
    assert_eq!(f.dec.decrypt_slots(&f.ev.add(&cu, &zero).unwrap()).unwrap(), u);
    assert!(f
        .dec
        .decrypt_slots(&f.ev.sub(&cu, &cu).unwrap())
        .unwrap()
        .iter()
        .all(|&x| x == 0));
}

#[test]
fn dot_plain_and_scaled_plaintexts() {
    let f = small();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let pe = PeriodicEncoder::new(&f.ctx, 16).unwrap();
    let xs: Vec<Vec<u64>> = (0..5).map(|_| random_slots(2048, &mut rng)).collect();
    let ws: Vec<Vec<u64>> = (0..5).map(|_| random_slots(16, &mut rng)).collect();
    let cts: Vec<Ciphertext> = xs.iter().map(|x| f.enc.encrypt_slots(x, &mut rng).unwrap()).collect();
    let pts: Vec<PreparedPlaintext> = ws.iter().map(|w| pe.prepare(w, 4).unwrap()).collect();
    let terms: Vec<(&Ciphertext, &PreparedPlaintext)> = cts.iter().zip(&pts).collect();
    let before = f.ev.counters().snapshot();
    let dot = f.ev.dot_plain(&terms).unwrap();
    let d = f.ev.counters().snapshot() - before;
    assert_eq!((d.ct_pt_muls, d.additions), (5, 4));
    let c = random_slots(16, &mut rng);
    let plus = f.ev.add_scaled(&dot, &pe.scaled(&c, 4).unwrap()).unwrap();
    let minus = f.ev.sub_scaled(&dot, &pe.scaled(&c, 4).unwrap()).unwrap();
    let got = f.dec.decrypt_slots(&dot).unwrap();
    let gp = f.dec.decrypt_slots(&plus).unwrap();
    let gm = f.dec.decrypt_slots(&minus).unwrap();
    for i in 0..2048 {
        let want = (0..5).map(|k| xs[k][i] * ws[k][i % 16] % T).sum::<u64>() % T;
        assert_eq!(got[i], want);
        assert_eq!(gp[i], (want + c[i % 16]) % T);
        assert_eq!(gm[i], (want + T - c[i % 16]) % T);
    }
    assert!(f.ev.dot_plain(&[]).is_err());
}

#[test]
fn multiplicative_homomorphism() {
    let f = small();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let u = random_slots(2048, &mut rng);
        let v = random_slots(2048, &mut rng);
        let cu = f.enc.encrypt_slots(&u, &mut rng).unwrap();
        let cv = f.enc.encrypt_slots(&v, &mut rng).unwrap();
        let m = f.dec.decrypt_slots(&f.ev.mul(&cu, &cv).unwrap()).unwrap();
        let sq = f.dec.decrypt_slots(&f.ev.square(&cu).unwrap()).unwrap();
        let mp = f.dec.decrypt_slots(&f.ev.mul_plain_slots(&cu, &v).unwrap()).unwrap();
        for i in 0..2048 {
            assert_eq!(m[i], u[i] * v[i] % T);
            assert_eq!(sq[i], u[i] * u[i] % T);
            assert_eq!(mp[i], u[i] * v[i] % T);
        }
    }
    let u = random_slots(2048, &mut rng);
    let cu = f.enc.encrypt_slots(&u, &mut rng).unwrap();
    let ones = vec![1u64; 2048];
    assert_eq!(f.dec.decrypt_slots(&f.ev.mul_plain_slots(&cu, &ones).unwrap()).unwrap(), u);
    let zero = f.enc.encrypt_slots(&[], &mut rng).unwrap();
    let z = f.dec.decrypt_slots(&f.ev.mul(&cu, &zero).unwrap()).unwrap();
    assert!(z.iter().all(|&x| x == 0));
}

#[test]
fn three_component_ciphertexts_decrypt() {
    let f = small();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let u = random_slots(2048, &mut rng);
    let cu = f.enc.encrypt_slots(&u, &mut rng).unwrap();
    let t = f.ev.mul_no_relin(&cu, &cu).unwrap();
    assert_eq!(t.size(), 3);
    let out = f.dec.decrypt_slots(&t).unwrap();
    let relin = f.dec.decrypt_slots(&f.ev.relinearize(&t).unwrap()).unwrap();
    assert_eq!(out, relin);
    for i in 0..2048 {
        assert_eq!(out[i], u[i] * u[i] % T);
    }
}

#[test]
fn rotations_match_plaintext_oracle() {
    let f = small();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let v = random_slots(2048, &mut rng);
    let ct = f.enc.encrypt_slots(&v, &mut rng).unwrap();
    for k in [1i64, -1, 2, 5, -5, 17] {
        let r = f.ev.rotate(&ct, k).unwrap();
        assert_eq!(f.dec.decrypt_slots(&r).unwrap(), rotate_slots(&v, k), "step {k}");
    }
    assert_eq!(f.dec.decrypt_slots(&f.ev.rotate(&ct, 0).unwrap()).unwrap(), v);
    let back = f.ev.rotate(&f.ev.rotate(&ct, 5).unwrap(), -5).unwrap();
    assert_eq!(f.dec.decrypt_slots(&back).unwrap(), v);
    let hoisted = f.ev.rotate_hoisted(&ct, &[0, 1, 2, 17]).unwrap();
    for (k, h) in [0i64, 1, 2, 17].iter().zip(&hoisted) {
        assert_eq!(f.dec.decrypt_slots(h).unwrap(), rotate_slots(&v, *k));
    }
}

#[test]
fn undeclared_rotation_is_missing_key() {
    let f = small();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ct = f.enc.encrypt_slots(&[1], &mut rng).unwrap();
    assert!(matches!(f.ev.rotate(&ct, 3), Err(Error::MissingKey(3))));
}

#[test]
fn level_mismatch_rejected() {
    let f = small();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = f.enc.encrypt_slots(&[1], &mut rng).unwrap();
    let b = f.ev.mod_switch_to(&a, 3).unwrap();
    assert!(matches!(f.ev.add(&a, &b), Err(Error::Level(_))));
    assert!(matches!(f.ev.mul(&a, &b), Err(Error::Level(_))));
}

#[test]
fn mod_switch_preserves_message_and_budget_is_monotone() {
    let f = small();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let v = random_slots(2048, &mut rng);
    let ct = f.enc.encrypt_slots(&v, &mut rng).unwrap();
    let fresh = f.dec.noise_budget(&ct).unwrap();
    let prod = f.ev.mul(&ct, &ct).unwrap();
    let after = f.dec.noise_budget(&prod).unwrap();
    assert!(fresh > after, "{fresh} vs {after}");
    for l in (1..4).rev() {
        let s = f.ev.mod_switch_to(&prod, l).unwrap();
        let b = f.dec.noise_budget(&s).unwrap();
        assert!(b <= after);
        if b > 0 {
            let want: Vec<u64> = v.iter().map(|x| x * x % T).collect();
            assert_eq!(f.dec.decrypt_slots(&s).unwrap(), want);
        }
    }
}

#[test]
fn estimator_is_conservative() {
    let f = small();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let v = random_slots(2048, &mut rng);
    let mut ct = f.enc.encrypt_slots(&v, &mut rng).unwrap();
    for step in 0..6 {
        let measured = f.dec.noise_budget(&ct).unwrap() as f64;
        let est = f.ev.estimated_budget(&ct);
        assert!(est <= measured + 1.0, "step {step}: estimate {est} > measured {measured}");
        if est < 60.0 {
            break;
        }
        ct = match step % 3 {
            0 => f.ev.mul_plain_slots(&ct, &random_slots(2048, &mut rng)).unwrap(),
            1 => f.ev.square(&ct).unwrap(),
            _ => f.ev.rotate(&ct, 1).unwrap(),
        };
    }
}

#[test]
fn exhausted_budget_reported_as_zero() {
    let f = small();
    let ev = Evaluator::new(&f.ctx, Arc::new(f.keys.evk.clone())).unchecked();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let v = random_slots(2048, &mut rng);
    let mut ct = f.enc.encrypt_slots(&v, &mut rng).unwrap();
    let mut want = v.clone();
    let mut failed = false;
    for _ in 0..12 {
        ct = ev.square(&ct).unwrap();
        want = want.iter().map(|x| x * x % T).collect();
        if f.dec.decrypt_slots(&ct).unwrap() != want {
            assert_eq!(f.dec.noise_budget(&ct).unwrap(), 0);
            failed = true;
            break;
        }
    }
    assert!(failed, "budget never ran out");
    // and the checked evaluator refuses to go that far
    let mut ct = f.enc.encrypt_slots(&v, &mut rng).unwrap();
    let err = loop {
        match f.ev.square(&ct) {
            Ok(c) => ct = c,
            Err(e) => break e,
        }
    };
    assert!(matches!(err, Error::DepthExhausted(_)));
}

#[test]
fn keygen_is_deterministic() {
    let ctx = BfvContext::from_profile(BfvProfile::custom("small", 1024, 2, 60)).unwrap();
    let steps: BTreeSet<i64> = [1, 2].into_iter().collect();
    let a = keygen(&ctx, &steps, &[1; 32]).unwrap();
    let b = keygen(&ctx, &steps, &[1; 32]).unwrap();
    let c = keygen(&ctx, &steps, &[2; 32]).unwrap();
    assert_eq!(a.public, b.public);
    assert_eq!(a.evk, b.evk);
    assert_eq!(a.secret.coeffs(), b.secret.coeffs());
    assert_ne!(a.public, c.public);
}

#[test]
fn rotation_steps_validated() {
    let ctx = BfvContext::from_profile(BfvProfile::custom("small", 1024, 2, 60)).unwrap();
    let steps: BTreeSet<i64> = [512].into_iter().collect();
    assert!(matches!(keygen(&ctx, &steps, &[1; 32]), Err(Error::Parameter(_))));
}

/// Prints measured budgets along the transciphering-shaped circuit.
#[test]
#[ignore]
fn budget_trace() {
    for p in PROFILES {
        let f = fixture(p, &[1]);
        let n = f.ctx.degree();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let v = random_slots(n, &mut rng);
        let mut ct = f.enc.encrypt_slots(&v, &mut rng).unwrap();
        let report = |tag: &str, c: &Ciphertext| {
            eprintln!(
                "{} {tag:>10}: level {} measured {} estimated {:.1}",
                p.name,
                c.level(),
                f.dec.noise_budget(c).unwrap(),
                f.ev.estimated_budget(c)
            );
        };
        report("fresh", &ct);
        let mut step = |c: &Ciphertext, pm: bool| {
            if pm {
                f.ev.mul_plain_slots(c, &random_slots(n, &mut rng)).unwrap()
            } else {
                f.ev.square(c).unwrap()
            }
        };
        for r in 0..2 {
            ct = step(&ct, true);
            report(&format!("affine{r}"), &ct);
            ct = step(&ct, false);
            report("square", &ct);
            ct = f.ev.rotate(&ct, 1).unwrap();
            ct = step(&ct, true);
            report("mask", &ct);
        }
        ct = step(&ct, true);
        report("affine2", &ct);
        let sq = step(&ct, false);
        ct = f.ev.mul(&sq, &ct).unwrap();
        report("cube", &ct);
        ct = step(&ct, true);
        report("affine3", &ct);
        let w = f.enc.encrypt_slots(&v, &mut rng).unwrap();
        let w = f.ev.mod_switch_to(&w, ct.level()).unwrap();
        ct = f.ev.mul(&ct, &w).unwrap();
        report("eval-mul", &ct);
        for l in (1..ct.level()).rev() {
            let s = f.ev.mod_switch_to(&ct, l).unwrap();
            report(&format!("switch{l}"), &s);
        }
    }
}

#[test]
fn serialization_round_trips() {
    let f = small();
    let ctx = &f.ctx;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let v = random_slots(2048, &mut rng);
    let ct = f.enc.encrypt_slots(&v, &mut rng).unwrap();
    let three = f.ev.mul_no_relin(&ct, &ct).unwrap();
    let low = f.ev.mod_switch_to(&ct, 2).unwrap();
    for c in [&ct, &three, &low] {
        let b = c.to_bytes(ctx);
        assert_eq!(b.len(), c.serialized_len(ctx));
        let back = Ciphertext::from_bytes(ctx, &b).unwrap();
        assert_eq!(&back, c);
        assert_eq!(back.noise_estimate(), c.noise_estimate());
        assert_eq!(back.to_bytes(ctx), b);
    }
    let pt = f.ev.encoder().encode(&v).unwrap();
    assert_eq!(Plaintext::from_bytes(ctx, &pt.to_bytes(ctx)).unwrap(), pt);
    let pk = PublicKey::from_bytes(ctx, &f.keys.public.to_bytes(ctx)).unwrap();
    assert_eq!(pk, f.keys.public);
    let sk = SecretKey::from_bytes(ctx, &f.keys.secret.to_bytes(ctx)).unwrap();
    assert_eq!(sk.coeffs(), f.keys.secret.coeffs());
    let evk_bytes = f.keys.evk.to_bytes(ctx);
    let evk = EvaluationKey::from_bytes(ctx, &evk_bytes).unwrap();
    assert_eq!(evk, f.keys.evk);
    assert_eq!(evk.to_bytes(ctx), evk_bytes);

    // a reloaded key pair still works end to end
    let enc = Encryptor::new(ctx, &pk);
    let dec = Decryptor::new(ctx, &sk);
    let ev = Evaluator::new(ctx, Arc::new(evk));
    let c = ev.rotate(&enc.encrypt_slots(&v, &mut rng).unwrap(), 5).unwrap();
    assert_eq!(dec.decrypt_slots(&c).unwrap(), rotate_slots(&v, 5));
}

#[test]
fn same_seed_gives_byte_identical_keys() {
    let ctx = BfvContext::from_profile(BfvProfile::custom("small", 2048, 4, 60)).unwrap();
    let steps: BTreeSet<i64> = [1, -1].into_iter().collect();
    let a = keygen(&ctx, &steps, &[3; 32]).unwrap();
    let b = keygen(&ctx, &steps, &[3; 32]).unwrap();
    let c = keygen(&ctx, &steps, &[4; 32]).unwrap();
    assert_eq!(a.secret.to_bytes(&ctx), b.secret.to_bytes(&ctx));
    assert_eq!(a.public.to_bytes(&ctx), b.public.to_bytes(&ctx));
    assert_eq!(a.evk.to_bytes(&ctx), b.evk.to_bytes(&ctx));
    assert_ne!(a.public.to_bytes(&ctx), c.public.to_bytes(&ctx));
}

#[test]
fn malformed_encodings_rejected() {
    let f = small();
    let ctx = &f.ctx;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let ct = f.enc.encrypt_slots(&[1, 2], &mut rng).unwrap();
    let good = ct.to_bytes(ctx);

    let mut bumped = good.clone();
    bumped[4] = 2;
    assert!(matches!(Ciphertext::from_bytes(ctx, &bumped), Err(Error::Format(_))));

    let mut magic = good.clone();
    magic[0] = b'X';
    assert!(Ciphertext::from_bytes(ctx, &magic).is_err());

    let other = BfvContext::from_profile(BfvProfile::custom("other", 2048, 3, 60)).unwrap();
    assert!(Ciphertext::from_bytes(&other, &good).is_err());

    // a coefficient equal to its limb prime
    let mut range = good.clone();
    let q0 = ctx.top().q.modulus(0).value();
    let off = serial::HEADER_LEN + 2 + 8 + 2;
    range[off..off + 8].copy_from_slice(&q0.to_le_bytes());
    assert!(Ciphertext::from_bytes(ctx, &range).is_err());

    assert!(Ciphertext::from_bytes(ctx, &good[..good.len() - 1]).is_err());
    let mut long = good.clone();
    long.push(0);
    assert!(Ciphertext::from_bytes(ctx, &long).is_err());

    // a plaintext blob is not a ciphertext
    let pt = f.ev.encoder().encode(&[1]).unwrap().to_bytes(ctx);
    assert!(Ciphertext::from_bytes(ctx, &pt).is_err());

    let mut sk = f.keys.secret.to_bytes(ctx);
    let last = sk.len() - 1;
    sk[last] = 2;
    assert!(SecretKey::from_bytes(ctx, &sk).is_err());
}

#[test]
#[ignore]
fn op_timings() {
    use std::time::Instant;
    for p in PROFILES {
        let f = fixture(p, &[1, 2, 3, 4, 5, 6, 7, 8, 16, 24, 32]);
        let n = f.ctx.degree();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_slots(n, &mut rng);
        let ct = f.enc.encrypt_slots(&v, &mut rng).unwrap();
        let time = |name: &str, reps: u32, g: &mut dyn FnMut()| {
            let s = Instant::now();
            for _ in 0..reps {
                g();
            }
            eprintln!("{} {name}: {:.3} ms", p.name, s.elapsed().as_secs_f64() * 1e3 / reps as f64);
        };
        let pt = f.ev.encoder().encode(&v).unwrap();
        time("encode", 20, &mut || {
            f.ev.encoder().encode(&v).unwrap();
        });
        time("prepare", 20, &mut || {
            f.ev.prepare(&pt, 6).unwrap();
        });
        let pp = f.ev.prepare(&pt, 6).unwrap();
        time("mul_plain", 20, &mut || {
            f.ev.mul_plain(&ct, &pp).unwrap();
        });
        time("rotate", 10, &mut || {
            f.ev.rotate(&ct, 1).unwrap();
        });
        time("hoisted x8", 5, &mut || {
            f.ev.rotate_hoisted(&ct, &[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        });
        time("square", 10, &mut || {
            f.ev.square(&ct).unwrap();
        });
        time("mul", 10, &mut || {
            f.ev.mul(&ct, &ct).unwrap();
        });
        time("encrypt", 10, &mut || {
            f.enc.encrypt_slots(&v, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        });
        time("decrypt", 10, &mut || {
            f.dec.decrypt_slots(&ct).unwrap();
        });
        time("mod_switch to 3", 10, &mut || {
            f.ev.mod_switch_to(&ct, 3).unwrap();
        });
    }
}
