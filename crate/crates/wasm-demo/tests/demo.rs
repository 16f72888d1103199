use hhe_wasm_demo::{parse_words, Demo};

#[test]
fn words_are_checked() {
    assert_eq!(parse_words("1, 2 3", 65537, 32).unwrap(), vec![1, 2, 3]);
    assert!(parse_words("", 65537, 32).is_err());
    assert!(parse_words("65537", 65537, 32).is_err());
    assert!(parse_words("-1", 65537, 32).is_err());
    assert!(parse_words(&vec!["1"; 33].join(","), 65537, 32).is_err());
}

#[test]
fn upload_then_transcipher_recovers_the_words() {
    let mut d = Demo::new(3).unwrap();
    assert!(d.transcipher().is_err());
    let up = d.encrypt("7, 65536, 0, 12345").unwrap();
    assert_eq!(up.cipher_words.len(), 4);
    assert_ne!(up.cipher_words, up.words);
    assert!(up.symmetric_bytes * 100 < up.bfv_bytes);
    let t = d.transcipher().unwrap();
    assert!(t.exact);
    assert_eq!(t.recovered, vec![7, 65536, 0, 12345]);
    assert!(t.noise_budget > 0 && t.rotations > 0);
}

#[test]
fn encrypted_beat_scores_match_plain_integers() {
    let mut d = Demo::new(4).unwrap();
    for seed in [1, 2] {
        let c = d.classify(seed).unwrap();
        assert_eq!(c.features.len(), 128);
        assert_eq!(c.encrypted_scores, c.integer_scores);
        assert!(c.noise_budget > 0);
    }
}
