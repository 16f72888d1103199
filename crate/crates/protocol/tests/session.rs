use hhe_core::bfv::BfvProfile;
use hhe_core::ml::{infer_modp_oracle, IntegerFcModel};
use hhe_core::pasta::{CipherProfile, SymCiphertext, SYM_HEADER_LEN, TEST};
use hhe_core::ring::PrimeField;
use hhe_protocol::messages::{HeResult, Upload};
use hhe_protocol::{Mode, Outgoing, PartyId, PayloadType, ProtocolError, Session, SessionConfig, Transcript};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const P: u64 = 65537;

fn cfg(mode: Mode, users: &[u8], seed: u8) -> SessionConfig {
    SessionConfig {
        mode,
        bfv: BfvProfile::custom("proto-small", 2048, 6, 60),
        cipher: TEST,
        users: users.to_vec(),
        seed: [seed; 32],
        keep_bytes: true,
    }
}

fn field() -> PrimeField {
    PrimeField::new(P).unwrap()
}

fn random_model(rng: &mut impl Rng, in_dim: usize, out_dim: usize) -> IntegerFcModel {
    let w = (0..out_dim)
        .map(|_| (0..in_dim).map(|_| rng.gen_range(-300..=300)).collect())
        .collect();
    let b = (0..out_dim).map(|_| rng.gen_range(-1000..=1000)).collect();
    IntegerFcModel::new(w, b).unwrap()
}

fn small_vec(rng: &mut impl Rng, n: usize) -> Vec<u64> {
    (0..n).map(|_| rng.gen_range(0..16)).collect()
}

fn oracle(m: &IntegerFcModel, x: &[u64]) -> Vec<i64> {
    let q: Vec<u8> = x.iter().map(|&v| v as u8).collect();
    infer_modp_oracle(m, &field(), &q).unwrap()
}

#[test]
fn tee_setup_gives_csp_the_evk_only() {
    let s = Session::setup(cfg(Mode::Tee, &[0, 1], 1)).unwrap();
    assert!(s.has_tee());
    assert!(!s.analyst_holds_secret_key());
    let state = s.csp().state_bytes();
    assert_eq!(state.len(), 1);
    assert_eq!(&state[0].1[..4], b"HHEK");
    let report = s.hygiene();
    assert!(report.clean(), "{report:?}");
    assert!(s.transcript().records().iter().all(|r| r.accepted));
    // evk, pk to two users and the analyst, PKE key to the TEE
    assert_eq!(s.transcript().records().len(), 5);
}

#[test]
fn three_party_setup_keeps_the_key_with_the_analyst() {
    let s = Session::setup(cfg(Mode::ThreeParty, &[0], 1)).unwrap();
    assert!(!s.has_tee());
    assert!(s.analyst_holds_secret_key());
    assert_eq!(s.transcript().records().len(), 2);
}

fn run(mode: Mode, seed: u8) -> (Session, Vec<Vec<i64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(seed));
    let mut s = Session::setup(cfg(mode, &[0, 1], seed)).unwrap();
    let model = random_model(&mut rng, 20, 3);
    s.upload(0, &[small_vec(&mut rng, 20), small_vec(&mut rng, 20)]).unwrap();
    s.upload(1, &[small_vec(&mut rng, 20)]).unwrap();
    s.send_model(&model).unwrap();
    let res = [(0, 0), (0, 1), (1, 0)]
        .iter()
        .map(|&(u, i)| {
            s.eval_at_csp(u, i).unwrap();
            s.classify(u, i).unwrap()
        })
        .collect();
    (s, res)
}

fn transcript_hash(t: &Transcript) -> [u8; 32] {
    Sha256::digest(t.to_json_lines(true)).into()
}

#[test]
fn deterministic_under_seed() {
    let (a, ra) = run(Mode::Tee, 5);
    let (b, rb) = run(Mode::Tee, 5);
    assert_eq!(ra, rb);
    assert_eq!(transcript_hash(a.transcript()), transcript_hash(b.transcript()));
    let (c, _) = run(Mode::Tee, 6);
    assert_ne!(transcript_hash(a.transcript()), transcript_hash(c.transcript()));
}

#[test]
fn modes_agree_and_match_the_oracle() {
    let (s3, r3) = run(Mode::ThreeParty, 9);
    let (st, rt) = run(Mode::Tee, 9);
    assert_eq!(r3, rt);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = random_model(&mut rng, 20, 3);
    let xs: Vec<Vec<u64>> = (0..3).map(|_| small_vec(&mut rng, 20)).collect();
    for (r, x) in r3.iter().zip(&xs) {
        assert_eq!(r, &oracle(&model, x));
    }
    for s in [&s3, &st] {
        let h = s.hygiene();
        assert!(h.clean(), "{:?} {:?}", h.csp_findings, h.transcript_findings);
        assert_eq!(s.transcript().replay(s.directory()).unwrap(), s.transcript().records().len());
    }
    // the TEE path adds CSP -> TEE and TEE -> analyst edges
    let edges = st.transcript().edge_totals();
    assert!(edges.contains_key("csp-tee") && edges.contains_key("analyst-tee"));
    assert!(!s3.transcript().edge_totals().contains_key("csp-tee"));
}

#[test]
fn oracle_agreement_over_random_sessions() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for k in 0..50u8 {
        let mode = if k % 2 == 0 { Mode::ThreeParty } else { Mode::Tee };
        let mut s = Session::setup(cfg(mode, &[3], 100 + k)).unwrap();
        let in_dim = rng.gen_range(1..=32);
        let out_dim = rng.gen_range(1..=4);
        let model = random_model(&mut rng, in_dim, out_dim);
        let x = small_vec(&mut rng, in_dim);
        s.upload(3, &[x.clone()]).unwrap();
        s.send_model(&model).unwrap();
        let p = s.infer_encrypted(3, 0, 0).unwrap();
        let want = oracle(&model, &x);
        assert_eq!(p.scores, want.iter().map(|&v| v as f64).collect::<Vec<_>>(), "session {k}");
    }
}

#[test]
fn zero_weights_return_the_bias() {
    let mut s = Session::setup(cfg(Mode::Tee, &[0], 2)).unwrap();
    let model = IntegerFcModel::new(vec![vec![0; 8]; 2], vec![-5, 321]).unwrap();
    s.upload(0, &[vec![15; 8], vec![3; 8]]).unwrap();
    s.send_model(&model).unwrap();
    for i in 0..2 {
        s.eval_at_csp(0, i).unwrap();
        assert_eq!(s.classify(0, i).unwrap(), vec![-5, 321]);
    }
}

fn flip(o: &Outgoing, i: usize) -> Outgoing {
    let mut t = o.clone();
    t.bytes[i] ^= 0x40;
    t
}

fn sample_positions(len: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..hhe_protocol::HEADER_LEN).collect();
    v.extend(len - hhe_protocol::SIGNATURE_LEN..len);
    v.extend((0..40).map(|_| rng.gen_range(0..len)));
    v
}

#[test]
fn tampered_m1_m2_m3_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut s = Session::setup(cfg(Mode::Tee, &[0], 3)).unwrap();

    let m1 = s.prepare_upload(0, &[small_vec(&mut rng, 10)]).unwrap();
    for i in sample_positions(m1.bytes.len(), &mut rng) {
        assert!(s.deliver(&flip(&m1, i)).is_err(), "m1 byte {i}");
    }
    assert_eq!(s.csp().stored_inputs(PartyId::user(0).unwrap()), 0);
    s.deliver(&m1).unwrap();
    assert_eq!(s.csp().stored_inputs(PartyId::user(0).unwrap()), 1);
    assert!(matches!(s.deliver(&m1), Err(ProtocolError::Replay { .. })));
    assert_eq!(s.csp().stored_inputs(PartyId::user(0).unwrap()), 1);

    let model = random_model(&mut rng, 10, 2);
    let m2 = s.prepare_model(&model).unwrap();
    for i in sample_positions(m2.bytes.len(), &mut rng) {
        assert!(s.deliver(&flip(&m2, i)).is_err(), "m2 byte {i}");
    }
    assert!(!s.csp().has_model());
    s.deliver(&m2).unwrap();

    s.eval_at_csp(0, 0).unwrap();
    let to_tee = s.prepare_result(0, 0).unwrap();
    let m3 = s.deliver(&to_tee).unwrap().expect("the TEE answers with m3");
    assert_eq!(m3.kind, PayloadType::SealedResult);
    for i in 0..m3.bytes.len() {
        assert!(s.deliver(&flip(&m3, i)).is_err(), "m3 byte {i}");
    }
    assert!(s.analyst_scores(0, 0).is_err());
    s.deliver(&m3).unwrap();
    assert_eq!(s.analyst_scores(0, 0).unwrap().len(), 2);
    let rejected = s.transcript().records().iter().filter(|r| !r.accepted).count();
    assert!(rejected > 100);
}

#[test]
fn forged_m3_rejected() {
    let mut s = Session::setup(cfg(Mode::Tee, &[0], 4)).unwrap();
    s.upload(0, &[vec![1, 2, 3]]).unwrap();
    s.send_model(&IntegerFcModel::new(vec![vec![1, 1, 1]], vec![0]).unwrap()).unwrap();
    s.eval_at_csp(0, 0).unwrap();
    let to_tee = s.prepare_result(0, 0).unwrap();
    let m3 = s.deliver(&to_tee).unwrap().unwrap();
    // re-signed by a party that is not the TEE
    let mut forger = hhe_protocol::Signer::new(PartyId::TEE, [0xAB; 32]);
    let env = hhe_protocol::Envelope::from_bytes(&m3.bytes).unwrap();
    let forged = forger.seal(PayloadType::SealedResult, env.payload);
    let bad = Outgoing {
        bytes: forged.to_bytes(),
        ..m3.clone()
    };
    assert!(matches!(s.deliver(&bad), Err(ProtocolError::BadSignature(_))));
    s.deliver(&m3).unwrap();
    assert_eq!(s.analyst_scores(0, 0).unwrap(), vec![6]);
}

#[test]
fn wrong_recipients_and_missing_data() {
    let mut s = Session::setup(cfg(Mode::ThreeParty, &[0], 5)).unwrap();
    assert!(matches!(s.eval_at_csp(0, 0), Err(ProtocolError::NotFound(_))));
    s.upload(0, &[vec![1, 2]]).unwrap();
    assert!(matches!(s.eval_at_csp(0, 0), Err(ProtocolError::NotFound(_))));
    assert!(matches!(s.eval_at_csp(0, 1), Err(ProtocolError::NotFound(_))));
    // an upload addressed to the analyst is refused
    let mut m1 = s.prepare_upload(0, &[vec![3]]).unwrap();
    m1.to = PartyId::ANALYST;
    assert!(matches!(s.deliver(&m1), Err(ProtocolError::Unexpected(..))));
    // over-long inputs cannot go through a one-block layer
    s.upload(0, &[vec![1; 40]]).unwrap();
    s.send_model(&IntegerFcModel::new(vec![vec![1; 2]], vec![0]).unwrap()).unwrap();
    assert!(s.eval_at_csp(0, 1).is_err());
}

#[test]
fn results_are_bound_to_their_session_key() {
    let (a, _) = run(Mode::ThreeParty, 20);
    let (mut b, _) = run(Mode::ThreeParty, 21);
    // session a's result, handed to session b's analyst under b's CSP identity
    let rec = a
        .transcript()
        .records()
        .iter()
        .find(|r| r.kind == PayloadType::HeResult)
        .unwrap();
    let env = hhe_protocol::Envelope::from_bytes(rec.bytes.as_ref().unwrap()).unwrap();
    let res_a = HeResult::decode(a.context(), &env.payload).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let model = random_model(&mut rng, 20, 3);
    let x = small_vec(&mut rng, 20);
    let want = oracle(&model, &x);
    // b's analyst decrypts a's ciphertext: either refused or garbage
    let bundle_b = hhe_core::hhe::hhe_keygen(
        b.config().bfv,
        b.config().cipher,
        &{
            let mut h = Sha256::new();
            h.update(b"unrelated");
            h.finalize().into()
        },
    )
    .unwrap();
    match hhe_core::hhe::hhe_dec(&bundle_b.decryptor(), &res_a.ct) {
        Err(_) => {}
        Ok(slots) => {
            let got: Vec<i64> = res_a.score_slots().map(|i| field().lift_signed(slots[i])).collect();
            assert_ne!(got, want);
        }
    }
    assert!(b.classify(0, 0).is_ok());
}

#[test]
fn upload_bytes_grow_linearly() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut s = Session::setup(cfg(Mode::Tee, &[0, 1, 2], 8)).unwrap();
    let mut sizes = Vec::new();
    for (u, n) in [(0u8, 1usize), (1, 50), (2, 300)] {
        let xs: Vec<Vec<u64>> = (0..n).map(|_| (0..4).map(|_| rng.gen_range(0..P)).collect()).collect();
        let o = s.prepare_upload(u, &xs).unwrap();
        let env = hhe_protocol::Envelope::from_bytes(&o.bytes).unwrap();
        let up = Upload::decode(s.context(), &env.payload).unwrap();
        assert_eq!(up.symmetric_len(), n * (SYM_HEADER_LEN + 4 * 8));
        assert!(up.inputs.iter().all(|c: &SymCiphertext| c.len() == 4));
        sizes.push((n, o.bytes.len(), up.key.to_bytes(s.context()).len()));
        s.deliver(&o).unwrap();
    }
    // constant key, constant framing, linear symmetric part
    assert!(sizes.iter().all(|&(_, _, k)| k == sizes[0].2));
    let per = SYM_HEADER_LEN + 32 + 8;
    for &(n, total, _) in &sizes {
        assert_eq!(total - n * per, sizes[0].1 - per);
    }
}

#[test]
fn accounting_identity_and_export() {
    assert!(Transcript::new(true).to_json_lines(true).is_empty());
    assert_eq!(Transcript::new(false).records().len(), 0);
    let (s, _) = run(Mode::Tee, 30);
    let t = s.transcript();
    let edges: u64 = t.edge_totals().values().sum();
    assert_eq!(edges, t.total_bytes());
    assert_eq!(t.total_bytes(), t.records().iter().map(|r| r.bytes.as_ref().unwrap().len() as u64).sum::<u64>());
    let lines: Vec<serde_json::Value> = t
        .to_json_lines(false)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), t.records().len());
    assert_eq!(lines[0]["type"], "eval-key");
    assert_eq!(lines[0]["from"], 3);
    assert!(lines[0].get("envelope").is_none());
    assert!(t.to_json_lines(true).lines().next().unwrap().contains("\"envelope\":\"48484"));
}

#[test]
fn pasta_profile_round_trips_through_the_bus() {
    let mut c = cfg(Mode::ThreeParty, &[0], 40);
    c.cipher = CipherProfile::by_name("pasta3-like").unwrap();
    let mut s = Session::setup(c).unwrap();
    let model = IntegerFcModel::fixture();
    let x: Vec<u64> = (0..128).map(|i| (i % 16) as u64).collect();
    s.upload(0, &[x.clone()]).unwrap();
    s.send_model(&model).unwrap();
    let p = s.infer_encrypted(0, 0, 1).unwrap();
    let want = oracle(&model, &x);
    assert_eq!(p.scores, want.iter().map(|&v| v as f64).collect::<Vec<_>>());
}

