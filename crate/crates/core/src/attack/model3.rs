//! Single-round attack with the fault branch drawn from `0..=7` of round 27.
//!
//! The branch is first recovered from the ciphertext difference; branches
//! `0..=6` each leave a distinctive pattern of equal and zero nibbles, and
//! branch 7 is whatever matches none of them.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::constraints::{intersect_all, round29_left_diff, round_key_masks, union_all};
use super::model2::{update_branch7, PairSummary};
use super::{CandidateState, StoredFault};
use crate::cipher::CipherState;
use crate::differential::{possible, NibbleSet};
use crate::error::{Error, Result};
use crate::key_schedule::{invert_subkeys, Anchor, InversionOutcome};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Certainty {
    /// One of the seven branch patterns matched.
    Exact,
    /// No pattern matched, so the branch is taken to be 7.
    Complement,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct LocationVerdict {
    pub branch: usize,
    pub certainty: Certainty,
}

impl fmt::Display for LocationVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.certainty {
            Certainty::Exact => write!(f, "{}", self.branch),
            Certainty::Complement => write!(f, "{}?", self.branch),
        }
    }
}

/// The shared nonzero value of the given cells, if they all agree.
fn common(d: &[u8; 16], cells: &[usize]) -> Option<u8> {
    let v = d[cells[0]];
    (v != 0 && cells.iter().all(|&i| d[i] == v)).then_some(v)
}

fn differs(v: u8, d: &[u8; 16], cells: &[usize]) -> bool {
    cells.iter().all(|&i| d[i] != v)
}

/// Pattern left in the ciphertext difference by a fault at branch `b` in `0..=6`.
pub fn matches_branch(b: usize, dc: &CipherState) -> bool {
    let d = dc.cells();
    match b {
        0 => common(d, &[0, 1, 2, 3, 5, 7]).is_some_and(|v| differs(v, d, &[6])),
        1 => d[5] == 0 && d[7] == d[10] && common(d, &[0, 1, 2, 3, 6]).is_some_and(|v| differs(v, d, &[7])),
        2 => d[0] == 0 && common(d, &[1, 2, 3, 6]).is_some_and(|v| differs(v, d, &[5, 7])),
        3 => common(d, &[0, 1, 2, 3, 5]).is_some_and(|v| differs(v, d, &[4, 6, 7])),
        4 => d[3] == 0 && d[7] == d[12] && common(d, &[1, 2, 5, 6]).is_some_and(|v| differs(v, d, &[0, 7])),
        5 => d[1] == 0 && d[7] == d[14] && common(d, &[0, 3, 5, 6]).is_some_and(|v| differs(v, d, &[2, 7])),
        6 => d[2] == 0 && d[7] == d[13] && common(d, &[0, 1, 5, 6]).is_some_and(|v| differs(v, d, &[3, 7])),
        _ => false,
    }
}

pub fn identify_location(dc: &CipherState) -> Result<LocationVerdict> {
    let mut hits = (0..7).filter(|&b| matches_branch(b, dc));
    match (hits.next(), hits.next()) {
        (None, _) => Ok(LocationVerdict {
            branch: 7,
            certainty: Certainty::Complement,
        }),
        (Some(b), None) => Ok(LocationVerdict {
            branch: b,
            certainty: Certainty::Exact,
        }),
        (Some(a), Some(b)) => Err(Error::Inconsistent(format!(
            "difference {dc} matches the patterns of branches {a} and {b}"
        ))),
    }
}

/// `(e, candidates for e')` for a fault at branch `0..=6`; `e'` is unique
/// except at branch 1.
pub fn fault_values(branch: usize, dc: &CipherState) -> Result<(u8, NibbleSet)> {
    let d = |i: usize| dc.cell(i);
    let (e, eps) = match branch {
        0 => (d(6) ^ d(0), NibbleSet::singleton(d(0))),
        1 => {
            let e = d(0);
            let eps = (1..16u8)
                .filter(|&ep| possible(e, ep) && possible(ep, d(7) ^ e) && possible(d(2), d(13) ^ d(7) ^ ep))
                .collect();
            (e, eps)
        }
        2 | 4 => (d(1), NibbleSet::singleton(d(7) ^ d(1))),
        3 | 5 | 6 => (d(0), NibbleSet::singleton(d(7) ^ d(0))),
        _ => return Err(Error::InvalidFault(format!("branch {branch} has no closed form"))),
    };
    let eps = eps.intersect(NibbleSet::NONZERO);
    let eps: NibbleSet = eps.iter().filter(|&ep| possible(e, ep)).collect();
    if e == 0 || eps.is_empty() {
        return Err(Error::Inconsistent(format!("no fault value fits branch {branch}")));
    }
    Ok((e, eps))
}

pub(crate) fn update_detailed(
    c: &CipherState,
    cf: &CipherState,
    state: &mut CandidateState,
) -> Result<(LocationVerdict, PairSummary)> {
    let dc = c.diff(cf);
    if dc.is_zero() {
        return Err(Error::PairRejected(
            "correct and faulty ciphertexts are identical".into(),
        ));
    }
    let verdict = identify_location(&dc)?;
    if verdict.branch == 7 {
        return update_branch7(c, cf, state).map(|s| (verdict, s));
    }
    let b = verdict.branch;
    let (e, eps) = fault_values(b, &dc)?;
    let mut union = [NibbleSet::EMPTY; 8];
    for ep in eps.iter() {
        let masks = round_key_masks(c, &dc, &round29_left_diff(b, e, ep));
        if masks.iter().all(|m| !m.is_empty()) {
            union_all(&mut union, &masks);
        }
    }
    if union.iter().any(|m| m.is_empty()) {
        return Err(Error::Inconsistent(format!(
            "no RK29 candidate fits the branch-{b} difference"
        )));
    }
    intersect_all(&mut state.rk29, &union);
    state.stored.push(StoredFault {
        correct: *c,
        faulty: *cf,
        branch: b,
    });
    Ok((
        verdict,
        PairSummary {
            e: NibbleSet::singleton(e),
            e_prime: eps,
        },
    ))
}

/// Identifies the branch, then narrows `RK^29` and stores the pair for the
/// `RK^28` stage.
pub fn m3_update(c: &CipherState, cf: &CipherState, state: &mut CandidateState) -> Result<LocationVerdict> {
    update_detailed(c, cf, state).map(|(v, _)| v)
}

/// Replays the stored faults for `RK^28` and inverts the key schedule; any
/// `RK^28` nibble still ambiguous (normally only nibble 3) is left to the
/// key-schedule enumeration.
pub fn m3_finalize(state: &mut CandidateState, anchor: &Anchor) -> Result<InversionOutcome> {
    let rk29 = state.rk29_unique().ok_or_else(|| {
        state
            .first_ambiguous()
            .unwrap_or_else(|| Error::Inconsistent("RK29 not unique".into()))
    })?;
    super::model2::m2_recover_rk28(state, &rk29)?;
    invert_subkeys(&rk29, &state.rk28_partial(), anchor)
}
