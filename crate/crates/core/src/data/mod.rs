//! ECG beat records: CSV loading, class balancing, synthetic beats.
//!
//! A record is 128 samples in `[0, 1]` followed by a label token
//! `N`, `L`, `R`, `A` or `V`. Labels stay as read; the normal/diseased
//! mapping happens downstream.

mod synth;

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::{Error, Result};

pub use synth::synth_generate;

pub const FEATURES: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    N,
    L,
    R,
    A,
    V,
}

impl Label {
    pub const ALL: [Label; 5] = [Label::N, Label::L, Label::R, Label::A, Label::V];

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "N" => Some(Label::N),
            "L" => Some(Label::L),
            "R" => Some(Label::R),
            "A" => Some(Label::A),
            "V" => Some(Label::V),
            _ => None,
        }
    }

    /// 0 for normal beats, 1 for every diseased class.
    pub fn class(self) -> usize {
        usize::from(self != Label::N)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EcgRecord {
    pub features: Vec<f64>,
    pub label: Label,
}

impl EcgRecord {
    /// Clips features into `[0, 1]`, returning how many were out of range.
    pub fn new(mut features: Vec<f64>, label: Label) -> Result<(Self, usize)> {
        if features.len() != FEATURES {
            return Err(Error::Shape(format!("{} features, expected {FEATURES}", features.len())));
        }
        if let Some(i) = features.iter().position(|x| x.is_nan()) {
            return Err(Error::Domain(format!("feature {i} is NaN")));
        }
        let mut clipped = 0;
        for x in &mut features {
            if !(0.0..=1.0).contains(x) {
                *x = x.clamp(0.0, 1.0);
                clipped += 1;
            }
        }
        Ok((Self { features, label }, clipped))
    }
}

#[derive(Clone, Debug, Default)]
pub struct Loaded {
    pub records: Vec<EcgRecord>,
    /// Feature values pulled back into `[0, 1]`.
    pub clipped: usize,
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Loaded> {
    read_csv(std::fs::File::open(path)?)
}

/// No header, or one header line starting with `#`.
pub fn read_csv<R: Read>(input: R) -> Result<Loaded> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut out = Loaded::default();
    for row in rd.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                line,
                msg: e.to_string(),
            }
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let err = |msg: String| Error::Parse { line, msg };
        if row.len() != FEATURES + 1 {
            return Err(err(format!("{} columns, expected {}", row.len(), FEATURES + 1)));
        }
        let features = row
            .iter()
            .take(FEATURES)
            .enumerate()
            .map(|(i, s)| match s.trim().parse::<f64>() {
                Ok(x) if x.is_nan() => Err(err(format!("column {} is NaN", i + 1))),
                Ok(x) => Ok(x),
                Err(_) => Err(err(format!("column {}: {s:?} is not a number", i + 1))),
            })
            .collect::<Result<Vec<f64>>>()?;
        let token = &row[FEATURES];
        let label = Label::parse(token).ok_or_else(|| err(format!("unknown label {token:?}")))?;
        let (rec, clipped) = EcgRecord::new(features, label).map_err(|e| err(e.to_string()))?;
        out.clipped += clipped;
        out.records.push(rec);
    }
    Ok(out)
}

/// Six decimals per feature.
pub fn write_csv<W: Write>(out: W, records: &[EcgRecord]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for r in records {
        let mut row: Vec<String> = r.features.iter().map(|x| format!("{x:.6}")).collect();
        row.push(r.label.to_string());
        wr.write_record(&row).map_err(|e| Error::Format(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

/// Downsample the larger of the two classes (normal / diseased) to the
/// size of the smaller, then shuffle. Deterministic in `seed`.
pub fn balance(records: &[EcgRecord], seed: u64) -> Result<Vec<EcgRecord>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (mut normal, mut diseased): (Vec<&EcgRecord>, Vec<&EcgRecord>) =
        records.iter().partition(|r| r.label.class() == 0);
    if normal.is_empty() || diseased.is_empty() {
        return Err(Error::Balance(format!(
            "need both classes, have {} normal and {} diseased",
            normal.len(),
            diseased.len()
        )));
    }
    let k = normal.len().min(diseased.len());
    for side in [&mut normal, &mut diseased] {
        if side.len() > k {
            side.shuffle(&mut rng);
            side.truncate(k);
        }
    }
    let mut out: Vec<EcgRecord> = normal.into_iter().chain(diseased).cloned().collect();
    out.shuffle(&mut rng);
    Ok(out)
}

/// Per-class counts, in [`Label::ALL`] order.
pub fn label_counts(records: &[EcgRecord]) -> [usize; 5] {
    let mut c = [0; 5];
    for r in records {
        c[r.label as usize] += 1;
    }
    c
}
