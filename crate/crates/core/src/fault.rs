//! Nibble fault injection and the samplers for each fault model.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cipher::{encrypt_from, encrypt_until, CipherState, RoundKey, ROUNDS};
use crate::error::{parse_err, Error, Result};

/// XOR of `value` into cell `branch` of the input state of round `round`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct FaultSpec {
    pub round: usize,
    pub branch: usize,
    pub value: u8,
}

impl FaultSpec {
    pub fn new(round: usize, branch: usize, value: u8) -> Result<Self> {
        if round >= ROUNDS {
            return Err(Error::RoundOutOfRange(round));
        }
        if branch >= 16 {
            return Err(Error::InvalidFault(format!("branch {branch} is outside 0..=15")));
        }
        if value == 0 || value > 0xF {
            return Err(Error::InvalidFault(format!(
                "fault value {value:#x} must be a nonzero nibble"
            )));
        }
        Ok(FaultSpec { round, branch, value })
    }

    fn validate(&self) -> Result<()> {
        FaultSpec::new(self.round, self.branch, self.value).map(|_| ())
    }
}

impl fmt::Display for FaultSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}:b{}:v{:x}", self.round, self.branch, self.value)
    }
}

impl FromStr for FaultSpec {
    type Err = Error;

    /// `r{round}:b{branch}:v{hex}`, e.g. `r27:b7:vA`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| parse_err("fault spec", s, reason);
        let mut parts = s.trim().split(':');
        let mut field = |prefix: char| -> Result<&str> {
            parts
                .next()
                .and_then(|p| p.strip_prefix(prefix))
                .ok_or_else(|| bad(&format!("expected '{prefix}' field (format r<round>:b<branch>:v<hex>)")))
        };
        let round = field('r')?.parse::<usize>().map_err(|e| bad(&e.to_string()))?;
        let branch = field('b')?.parse::<usize>().map_err(|e| bad(&e.to_string()))?;
        let value = u8::from_str_radix(field('v')?, 16).map_err(|e| bad(&e.to_string()))?;
        if parts.next().is_some() {
            return Err(bad("trailing fields"));
        }
        FaultSpec::new(round, branch, value)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum FaultModel {
    /// Round 28, branch 7.
    ModelIPhase1,
    /// Round 27, branch 7 (second phase of the two-round attack).
    ModelIPhase2,
    /// Round 27, branch 7.
    ModelII,
    /// Round 27, branch uniform over 0..=7.
    ModelIII,
}

impl FaultModel {
    pub fn round(self) -> usize {
        match self {
            FaultModel::ModelIPhase1 => 28,
            _ => 27,
        }
    }
}

/// Encrypts `p` with `fault` applied to the input of round `fault.round`.
pub fn faulty_encrypt(p: &CipherState, rks: &[RoundKey], fault: &FaultSpec) -> Result<CipherState> {
    fault.validate()?;
    if rks.len() != ROUNDS {
        return Err(Error::RoundKeyCount {
            expected: ROUNDS,
            actual: rks.len(),
        });
    }
    let x = encrypt_until(p, rks, fault.round).with_xor(fault.branch, fault.value);
    Ok(encrypt_from(&x, rks, fault.round))
}

pub fn sample_fault<R: Rng + ?Sized>(model: FaultModel, rng: &mut R) -> FaultSpec {
    let value = rng.random_range(1..=15u8);
    let branch = match model {
        FaultModel::ModelIII => rng.random_range(0..8usize),
        _ => 7,
    };
    FaultSpec {
        round: model.round(),
        branch,
        value,
    }
}
