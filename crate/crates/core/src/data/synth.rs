use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use super::{EcgRecord, Label, FEATURES};
use crate::{Error, Result};

/// One Gaussian bump: centre, width, height.
#[derive(Clone, Copy)]
struct Wave(f64, f64, f64);

/// P, Q, R, S, T for a normal beat, centred on the R peak at sample 48.
const NORMAL: [Wave; 5] = [
    Wave(22.0, 4.5, 0.10),
    Wave(43.0, 1.8, -0.08),
    Wave(48.0, 2.0, 0.55),
    Wave(53.0, 2.0, -0.12),
    Wave(84.0, 8.0, 0.18),
];

fn morphology(label: Label) -> Vec<Wave> {
    let mut w = NORMAL.to_vec();
    match label {
        Label::N => {}
        // wide, notched complex
        Label::L => {
            w[2] = Wave(49.0, 5.0, 0.42);
            w[3] = Wave(58.0, 3.0, -0.05);
            w[4] = Wave(86.0, 9.0, -0.10);
        }
        // late secondary peak
        Label::R => {
            w[3] = Wave(53.0, 1.8, -0.15);
            w.push(Wave(58.0, 2.5, 0.30));
        }
        // early, flattened P and a short coupling
        Label::A => {
            w[0] = Wave(27.0, 3.5, 0.06);
            w[4] = Wave(81.0, 7.5, 0.21);
        }
        // broad tall complex, no P, inverted T
        Label::V => {
            w[0] = Wave(22.0, 4.5, 0.0);
            w[2] = Wave(50.0, 6.0, 0.65);
            w[3] = Wave(60.0, 4.0, -0.15);
            w[4] = Wave(88.0, 10.0, -0.18);
        }
    }
    w
}

/// Half normal beats, half diseased (uniform over `L R A V`), each with
/// amplitude and timing jitter, baseline wander and white noise.
pub fn synth_generate(n: usize, seed: u64) -> Result<Vec<EcgRecord>> {
    if n == 0 {
        return Err(Error::Shape("need at least one record".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.08).expect("valid sigma");
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let label = if rng.gen_bool(0.5) {
            Label::N
        } else {
            Label::ALL[rng.gen_range(1..5)]
        };
        let gain: f64 = rng.gen_range(0.6..1.4);
        let shift: f64 = rng.gen_range(-8.0..8.0);
        let base: f64 = rng.gen_range(0.30..0.40);
        let drift: f64 = rng.gen_range(-0.04..0.04);
        let waves = morphology(label);
        let features = (0..FEATURES)
            .map(|i| {
                let x = i as f64;
                let beat: f64 = waves
                    .iter()
                    .map(|&Wave(c, w, h)| h * (-0.5 * ((x - c - shift) / w).powi(2)).exp())
                    .sum();
                base + drift * x / FEATURES as f64 + gain * beat + noise.sample(&mut rng)
            })
            .collect();
        let (rec, _) = EcgRecord::new(features, label)?;
        out.push(rec);
    }
    Ok(out)
}
