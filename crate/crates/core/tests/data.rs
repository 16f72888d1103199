use proptest::prelude::*;

use hhe_core::data::*;
use hhe_core::Error;

fn row(values: &[f64], label: &str) -> String {
    let mut s: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    s.push(label.into());
    s.join(",")
}

#[test]
fn three_rows_load() {
    let text = [
        "# header".to_string(),
        row(&[0.5; FEATURES], "N"),
        row(&[0.25; FEATURES], "V"),
        row(&[1.0; FEATURES], "A"),
    ]
    .join("\n");
    let got = read_csv(text.as_bytes()).unwrap();
    assert_eq!(got.records.len(), 3);
    assert_eq!(got.clipped, 0);
    assert_eq!(got.records[1].label, Label::V);
    assert_eq!(got.records[2].features[0], 1.0);
}

#[test]
fn empty_file_is_empty() {
    assert!(read_csv(&b""[..]).unwrap().records.is_empty());
}

#[test]
fn short_row_names_its_line() {
    let text = format!("{}\n{}\n", row(&[0.1; FEATURES], "N"), row(&[0.1; 127], "N"));
    match read_csv(text.as_bytes()) {
        Err(Error::Parse { line, msg }) => {
            assert_eq!(line, 2);
            assert!(msg.contains("128 columns"), "{msg}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn bad_tokens_rejected() {
    for (v, l) in [("abc", "N"), ("NaN", "N"), ("0.1", "Q")] {
        let mut cells = vec!["0.1"; FEATURES];
        cells[3] = v;
        let text = format!("{},{l}\n", cells.join(","));
        assert!(matches!(read_csv(text.as_bytes()), Err(Error::Parse { line: 1, .. })), "{v} {l}");
    }
}

#[test]
fn out_of_range_values_clipped_and_counted() {
    let mut v = vec![0.5; FEATURES];
    v[0] = -0.2;
    v[7] = 1.5;
    v[9] = 3.0;
    let got = read_csv(row(&v, "L").as_bytes()).unwrap();
    assert_eq!(got.clipped, 3);
    let f = &got.records[0].features;
    assert_eq!((f[0], f[7], f[9], f[1]), (0.0, 1.0, 1.0, 0.5));
}

#[test]
fn csv_round_trip_to_six_places() {
    let recs = synth_generate(20, 3).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &recs).unwrap();
    let back = read_csv(&buf[..]).unwrap().records;
    assert_eq!(back.len(), recs.len());
    for (a, b) in recs.iter().zip(&back) {
        assert_eq!(a.label, b.label);
        for (x, y) in a.features.iter().zip(&b.features) {
            assert!((x - y).abs() <= 5e-7, "{x} vs {y}");
        }
    }
}

fn labelled(normal: usize, diseased: usize) -> Vec<EcgRecord> {
    (0..normal + diseased)
        .map(|i| {
            let label = if i < normal { Label::N } else { Label::ALL[1 + i % 4] };
            EcgRecord::new(vec![i as f64 / 100.0; FEATURES], label).unwrap().0
        })
        .collect()
}

fn key(r: &EcgRecord) -> (u64, Label) {
    (r.features[0].to_bits(), r.label)
}

#[test]
fn balance_downsamples_majority() {
    let out = balance(&labelled(10, 4), 1).unwrap();
    assert_eq!(out.iter().filter(|r| r.label.class() == 0).count(), 4);
    assert_eq!(out.iter().filter(|r| r.label.class() == 1).count(), 4);
}

#[test]
fn balanced_input_keeps_its_multiset() {
    let input = labelled(5, 5);
    let mut a: Vec<_> = balance(&input, 9).unwrap().iter().map(key).collect();
    let mut b: Vec<_> = input.iter().map(key).collect();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn balance_is_deterministic_and_needs_both_classes() {
    let input = labelled(30, 7);
    assert_eq!(balance(&input, 5).unwrap(), balance(&input, 5).unwrap());
    assert_ne!(balance(&input, 5).unwrap(), balance(&input, 6).unwrap());
    assert!(matches!(balance(&labelled(3, 0), 1), Err(Error::Balance(_))));
    assert!(matches!(balance(&labelled(0, 3), 1), Err(Error::Balance(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn balance_never_fabricates(normal in 1usize..40, diseased in 1usize..40, seed: u64) {
        let input = labelled(normal, diseased);
        let out = balance(&input, seed).unwrap();
        let mut pool: Vec<_> = input.iter().map(key).collect();
        for r in &out {
            let i = pool.iter().position(|k| *k == key(r));
            prop_assert!(i.is_some());
            pool.swap_remove(i.unwrap());
        }
        prop_assert_eq!(out.len(), 2 * normal.min(diseased));
    }
}

#[test]
fn synth_is_seeded_and_in_range() {
    assert!(synth_generate(0, 1).is_err());
    let a = synth_generate(200, 11).unwrap();
    assert_eq!(a, synth_generate(200, 11).unwrap());
    assert_ne!(a, synth_generate(200, 12).unwrap());
    assert!(a.iter().all(|r| r.features.len() == FEATURES && r.features.iter().all(|x| (0.0..=1.0).contains(x))));
    let counts = label_counts(&a);
    assert!(counts[0] > 70 && counts[0] < 130, "{counts:?}");
    assert!(counts[1..].iter().all(|&c| c > 10), "{counts:?}");
}

