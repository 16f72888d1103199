//! Message flows for hybrid homomorphic inference between users, a cloud
//! service provider (CSP), an analyst and, optionally, a simulated TEE.
//!
//! Every message travels as a signed [`Envelope`] over an in-memory bus
//! ([`Session`]) that records sizes per edge. Users encrypt data under a
//! stream cipher and upload it with the HE-encrypted cipher key (m1); the
//! analyst uploads an HE-encrypted model (m2); the CSP transciphers and
//! evaluates, and the result reaches the analyst either directly (the
//! analyst holds the HE key) or decrypted by the TEE and sealed to the
//! analyst's PKE key (m3).

mod envelope;
mod error;
pub mod hygiene;
pub mod messages;
mod party;
pub mod pke;
mod session;
mod transcript;

pub use envelope::{
    Directory, Envelope, Inbox, PartyId, PayloadType, Role, Signer, HEADER_LEN, MAGIC, SIGNATURE_LEN, VERSION,
};
pub use error::{ProtocolError, Result};
pub use party::{Analyst, Csp};
pub use session::{HygieneReport, Mode, Outgoing, Session, SessionConfig};
pub use transcript::{edge, Record, Transcript};
