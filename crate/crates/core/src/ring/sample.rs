use std::sync::Arc;

use rand_core::RngCore;

use super::{Domain, RnsBasis, RnsPoly};

/// Tail bound of the discrete gaussian (6 sigma, sigma = 3.2).
pub const GAUSSIAN_BOUND: i64 = 19;

/// Cumulative table of `P(|x| <= k)` scaled by 2^63 for sigma = 3.2,
/// truncated at `GAUSSIAN_BOUND`. Computed offline at 60 digits.
const CDT: [u64; 20] = [
    1149872836518706973,
    3340023669317320718,
    5231742859181312982,
    6713673040852152709,
    7766573333558595572,
    8445050410543775182,
    8841576294031517592,
    9051758687454227207,
    9152802460441190481,
    9196859083481262423,
    9214281214904026344,
    9220529772758650828,
    9222562348483741346,
    9223162004373033245,
    9223322456656299389,
    9223361395058736926,
    9223369965413244325,
    9223371676247247624,
    9223371985993021523,
    9223372036854775808,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    Uniform,
    Ternary,
    Gaussian,
}

fn gaussian<R: RngCore>(rng: &mut R) -> i64 {
    let r = rng.next_u64();
    let u = r >> 1;
    let sign = r & 1;
    let mag = CDT.iter().position(|&c| u < c).unwrap_or(CDT.len() - 1) as i64;
    if mag == 0 {
        // zero has half the mass of each signed bucket; ignore the sign bit
        0
    } else if sign == 1 {
        -mag
    } else {
        mag
    }
}

/// Small signed coefficients from `kind` (ternary or gaussian).
pub fn small_coeffs<R: RngCore>(n: usize, kind: SampleKind, rng: &mut R) -> Vec<i64> {
    match kind {
        SampleKind::Ternary => (0..n)
            .map(|_| loop {
                // uniform over {0,1,2} from two bits, rejecting 3
                let v = rng.next_u32() & 3;
                if v < 3 {
                    break v as i64 - 1;
                }
            })
            .collect(),
        SampleKind::Gaussian => (0..n).map(|_| gaussian(rng)).collect(),
        SampleKind::Uniform => unreachable!("uniform samples are not small"),
    }
}

/// Draw a polynomial in the coefficient domain (uniform samples are
/// returned in the NTT domain, where uniformity is preserved and the
/// transform would be wasted work).
pub fn sample<R: RngCore>(basis: &Arc<RnsBasis>, kind: SampleKind, rng: &mut R) -> RnsPoly {
    let n = basis.degree();
    match kind {
        SampleKind::Uniform => {
            let mut p = RnsPoly::zero(basis, Domain::Ntt);
            for i in 0..basis.len() {
                let q = basis.modulus(i).value();
                let bits = 64 - q.leading_zeros();
                let mask = (1u64 << bits) - 1;
                for c in p.limb_mut(i) {
                    *c = loop {
                        let v = rng.next_u64() & mask;
                        if v < q {
                            break v;
                        }
                    };
                }
            }
            p
        }
        _ => {
            let coeffs = small_coeffs(n, kind, rng);
            RnsPoly::from_signed(basis, &coeffs).expect("length matches degree")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::prime::primes_below;
    use crate::xof::Xof;

    fn basis(n: usize) -> Arc<RnsBasis> {
        let primes = primes_below(2 * n as u64, 60, 2, &[]).unwrap();
        RnsBasis::new(n, &primes).unwrap()
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let b = basis(256);
        for kind in [SampleKind::Uniform, SampleKind::Ternary, SampleKind::Gaussian] {
            let x = sample(&b, kind, &mut Xof::from_seed(&[9; 32], "t"));
            let y = sample(&b, kind, &mut Xof::from_seed(&[9; 32], "t"));
            let z = sample(&b, kind, &mut Xof::from_seed(&[8; 32], "t"));
            assert_eq!(x, y);
            assert_ne!(x, z);
        }
    }

    #[test]
    fn ternary_support() {
        let b = basis(1024);
        let p = sample(&b, SampleKind::Ternary, &mut Xof::from_seed(&[1; 32], "s"));
        for i in 0..b.len() {
            let q = b.modulus(i).value();
            assert!(p.limb(i).iter().all(|&c| c == 0 || c == 1 || c == q - 1));
        }
        // limbs carry the same signed value
        let q0 = b.modulus(0).value();
        let q1 = b.modulus(1).value();
        for (&a, &c) in p.limb(0).iter().zip(p.limb(1)) {
            assert_eq!(a == q0 - 1, c == q1 - 1);
        }
    }

    #[test]
    fn gaussian_bounded_and_centered() {
        let mut rng = Xof::from_seed(&[2; 32], "g");
        let xs = small_coeffs(200_000, SampleKind::Gaussian, &mut rng);
        assert!(xs.iter().all(|x| x.abs() <= GAUSSIAN_BOUND));
        let mean = xs.iter().sum::<i64>() as f64 / xs.len() as f64;
        let var = xs.iter().map(|&x| (x * x) as f64).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var.sqrt() - 3.2).abs() < 0.05, "sd {}", var.sqrt());
    }

    #[test]
    fn uniform_low_bits_pass_chi_square() {
        let b = basis(16384);
        let p = sample(&b, SampleKind::Uniform, &mut Xof::from_seed(&[3; 32], "u"));
        let mut bins = [0u64; 256];
        for &c in p.data() {
            bins[(c & 0xff) as usize] += 1;
        }
        let total = p.data().len() as f64;
        let expect = total / 256.0;
        let chi2: f64 = bins
            .iter()
            .map(|&o| (o as f64 - expect).powi(2) / expect)
            .sum();
        // chi-square critical value, 255 degrees of freedom, alpha = 0.001
        assert!(chi2 < 330.52, "chi2 = {chi2}");
        for i in 0..b.len() {
            let q = b.modulus(i).value();
            assert!(p.limb(i).iter().all(|&c| c < q));
        }
    }
}
