//! Key recovery under the three fault models.
//!
//! All attacks keep a [`CandidateState`]: one [`NibbleSet`] per nibble of
//! `RK^29` and `RK^28`, shrunk by intersection as faulty ciphertexts arrive.

pub mod constraints;
pub mod model1;
pub mod model2;
pub mod model3;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cipher::{CipherState, RoundKey};
use crate::differential::NibbleSet;
use crate::error::{Error, Result};
use crate::key_schedule::{invert_subkeys, Anchor, InversionOutcome, PartialRoundKey};

pub use model1::{m1_recover_rk28, m1_update_rk28, m1_update_rk29};
pub use model2::{m2_candidates_e, m2_candidates_e_prime, m2_recover_rk28, m2_update};
pub use model3::{identify_location, m3_finalize, m3_update, Certainty, LocationVerdict};

/// A correct/faulty ciphertext pair kept for the `RK^28` stage.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct StoredFault {
    pub correct: CipherState,
    pub faulty: CipherState,
    /// Round-27 branch the fault was injected into, or identified at.
    pub branch: usize,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CandidateState {
    pub rk29: [NibbleSet; 8],
    pub rk28: [NibbleSet; 8],
    pub stored: Vec<StoredFault>,
}

impl Default for CandidateState {
    fn default() -> Self {
        CandidateState {
            rk29: [NibbleSet::FULL; 8],
            rk28: [NibbleSet::FULL; 8],
            stored: Vec::new(),
        }
    }
}

fn unique_key(masks: &[NibbleSet; 8]) -> Option<RoundKey> {
    let mut n = [0u8; 8];
    for (d, m) in n.iter_mut().zip(masks) {
        *d = m.single()?;
    }
    RoundKey::from_nibbles(n).ok()
}

impl CandidateState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rk29_unique(&self) -> Option<RoundKey> {
        unique_key(&self.rk29)
    }

    pub fn rk28_unique(&self) -> Option<RoundKey> {
        unique_key(&self.rk28)
    }

    /// `RK^28` with every non-singleton nibble marked unknown.
    pub fn rk28_partial(&self) -> PartialRoundKey {
        PartialRoundKey::new(self.rk28.map(|m| m.single())).expect("nibbles")
    }

    /// Whether every nibble outside `skip_rk28` is a singleton.
    pub fn is_resolved(&self, skip_rk28: &[usize]) -> bool {
        self.rk29.iter().all(|m| m.is_singleton())
            && self
                .rk28
                .iter()
                .enumerate()
                .all(|(i, m)| skip_rk28.contains(&i) || m.is_singleton())
    }

    pub fn rk29_sizes(&self) -> [u32; 8] {
        self.rk29.map(|m| m.len())
    }

    pub fn rk28_sizes(&self) -> [u32; 8] {
        self.rk28.map(|m| m.len())
    }

    /// `(round, nibble)` of the first non-singleton nibble, for diagnostics.
    pub fn first_ambiguous(&self) -> Option<Error> {
        for (round, masks) in [(29, &self.rk29), (28, &self.rk28)] {
            if let Some((nibble, m)) = masks.iter().enumerate().find(|(_, m)| !m.is_singleton()) {
                return Some(Error::NotUnique {
                    round,
                    nibble,
                    candidates: m.len(),
                });
            }
        }
        None
    }
}

/// One line of the attack trace, emitted per processed fault.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TraceLine {
    pub index: usize,
    pub fault: String,
    pub verdict: Option<LocationVerdict>,
    pub e: NibbleSet,
    pub e_prime: NibbleSet,
    pub rk29_sizes: [u32; 8],
    pub rk28_sizes: [u32; 8],
    pub note: Option<String>,
}

fn sizes(s: &[u32; 8]) -> String {
    s.iter().rev().map(|n| format!("{n:x}")).collect::<Vec<_>>().join("")
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:<3} {}", self.index, self.fault)?;
        if let Some(v) = &self.verdict {
            write!(f, " loc={v}")?;
        }
        write!(
            f,
            " e={:?} e'={:?} |rk29|={} |rk28|={}",
            self.e,
            self.e_prime,
            sizes(&self.rk29_sizes),
            sizes(&self.rk28_sizes)
        )?;
        if let Some(n) = &self.note {
            write!(f, " ({n})")?;
        }
        Ok(())
    }
}

/// Master key from fully known `RK^28` and `RK^29`.
pub fn recover_master_key(rk28: &RoundKey, rk29: &RoundKey, anchor: &Anchor) -> Result<InversionOutcome> {
    invert_subkeys(rk29, &PartialRoundKey::from(*rk28), anchor)
}
