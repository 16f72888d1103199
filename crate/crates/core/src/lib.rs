//! Hybrid homomorphic encryption toolkit.
//!
//! Layers, bottom up: [`ring`] (modular and RNS polynomial arithmetic),
//! [`bfv`] (batched leveled BFV), [`pasta`] (an HE-friendly stream cipher
//! over `F_p`), [`hhe`] (key bundle, hybrid encryption, transciphering and
//! evaluation), [`ml`] and [`data`] (quantized ECG inference).

pub mod bfv;
pub mod codec;
pub mod data;
pub mod error;
pub mod hhe;
pub mod ml;
pub mod pasta;
pub mod par;
pub mod ring;
pub mod xof;

pub use error::{Error, Result};
