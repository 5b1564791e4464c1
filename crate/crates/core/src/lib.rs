//! LILLIPUT lightweight block cipher together with a differential fault
//! analysis toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`cipher`]: the 64-bit, 30-round extended generalized Feistel cipher.
//! - [`key_schedule`]: the 80-bit LFSM key schedule, its exact GF(2) model and
//!   inversion from the last two round keys back to the master key.
//! - [`differential`]: DDT, preimage sets and per-nibble key candidates.
//! - [`fault`]: instrumented encryption and fault-model samplers.
//! - [`attack`]: key recovery under the three nibble fault models.
//! - [`campaign`]: seeded Monte-Carlo campaigns and result emission.

pub mod attack;
pub mod campaign;
pub mod cipher;
pub mod differential;
pub mod error;
pub mod fault;
pub mod gf2;
pub mod key_schedule;

pub use cipher::{decrypt, encrypt, CipherState, RoundKey, ROUNDS};
pub use differential::{compute_ddt, in_set, key_candidates, DdtTable, NibbleSet};
pub use error::{Error, Result};
pub use fault::{faulty_encrypt, sample_fault, FaultModel, FaultSpec};
pub use key_schedule::{expand_key, invert_subkeys, Anchor, LfsmState, MasterKey, PartialRoundKey};
