//! Leveled BFV over `R_q` with SIMD batching (RNS, HPS multiplication,
//! hybrid key switching with one special prime).

mod ciphertext;
mod encoding;
mod keys;
mod ops;
mod params;
mod rns;
pub mod serial;

pub use ciphertext::Ciphertext;
pub use encoding::{rotate_slots, BatchEncoder, PeriodicEncoder, Plaintext, PreparedPlaintext, ScaledPlaintext};
pub use keys::{keygen, EvaluationKey, GaloisKeys, HeKeys, KeySwitchKey, PublicKey, RelinKey, SecretKey};
pub use ops::{Decomposed, Decryptor, Encryptor, Evaluator, OpCounters, OpCounts, Raised};
pub use params::{BfvContext, BfvProfile, LevelContext, PAPER_16384, PROFILES, TEST_8192};

