use crate::ring::RnsPoly;

/// A BFV ciphertext. Components are kept in the NTT domain; the level is
/// the number of active chain limbs (it only decreases, via modulus
/// switching).
#[derive(Clone, Debug)]
pub struct Ciphertext {
    pub(crate) polys: Vec<RnsPoly>,
    /// Heuristic `log2` of the scaled noise `|t (c0 + c1 s) mod Q|`.
    pub(crate) noise: f64,
}

impl PartialEq for Ciphertext {
    fn eq(&self, other: &Self) -> bool {
        self.polys == other.polys
    }
}

impl Ciphertext {
    pub fn level(&self) -> usize {
        self.polys[0].num_limbs()
    }

    pub fn size(&self) -> usize {
        self.polys.len()
    }

    pub fn polys(&self) -> &[RnsPoly] {
        &self.polys
    }

    /// Estimated noise in bits (diagnostic only).
    pub fn noise_estimate(&self) -> f64 {
        self.noise
    }
}

/// `log2(2^a + 2^b)`
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (1.0 + (lo - hi).exp2()).log2()
}
