//! Single-round attack with every fault at round-27 branch 7.
//!
//! Neither the fault value `e` nor the round-27 S-box output `e'` can be read
//! off the ciphertext directly, so each fault yields a small set of `(e, e')`
//! pairs; key candidates are united over the pairs and intersected across faults.

use super::constraints::{
    admits, fault_value_from_round28, intersect_all, peel_last_round, round28_left_diff, round29_left_diff,
    round_key_masks, union_all,
};
use super::{CandidateState, StoredFault};
use crate::cipher::{CipherState, RoundKey};
use crate::differential::{possible, NibbleSet};
use crate::error::{Error, Result};

/// Fault values consistent with the ciphertext difference of a round-27
/// branch-7 fault.
pub fn m2_candidates_e(dc: &CipherState) -> NibbleSet {
    let d = |i: usize| dc.cell(i);
    let xor_1_7 = (1..8).fold(0u8, |acc, i| acc ^ d(i));
    (1..16u8)
        .filter(|&e| {
            // Round-28 S-boxes fed by e.
            possible(e, d(0) ^ e)
                && possible(e, d(2) ^ e)
                && possible(e, d(3) ^ e)
                && possible(e, d(4))
                && possible(e, d(5) ^ e)
                && possible(e, d(6) ^ e)
                // Round-29 S-boxes, with x = dC8 ^ e the output of S-box 0.
                && possible(d(7), d(8) ^ e)
                && [1usize, 3, 4, 5, 6]
                    .iter()
                    .all(|&i| possible(d(7 - i), d(8 + i) ^ d(7) ^ e))
                && possible(d(0), d(15) ^ xor_1_7 ^ e)
        })
        .collect()
}

/// Round-27 S-box outputs `e'` consistent with the difference and a given `e`.
pub fn m2_candidates_e_prime(dc: &CipherState, e: u8) -> NibbleSet {
    let d = |i: usize| dc.cell(i);
    (1..16u8)
        .filter(|&ep| {
            possible(e, ep) && possible(ep, d(1) ^ e) && possible(e, d(7) ^ ep ^ e) && possible(d(5), ep ^ d(10) ^ d(7))
        })
        .collect()
}

pub(crate) fn candidate_pairs(dc: &CipherState) -> Vec<(u8, u8)> {
    let mut pairs = Vec::new();
    for e in m2_candidates_e(dc).iter() {
        for ep in m2_candidates_e_prime(dc, e).iter() {
            pairs.push((e, ep));
        }
    }
    pairs
}

/// `RK^29` candidates from one fault: the union over pairs, per nibble.
pub(crate) fn rk29_union(c: &CipherState, dc: &CipherState, pairs: &[(u8, u8)]) -> [NibbleSet; 8] {
    let mut acc = [NibbleSet::EMPTY; 8];
    for &(e, ep) in pairs {
        let masks = round_key_masks(c, dc, &round29_left_diff(7, e, ep));
        // A pair that empties a nibble cannot be the true one.
        if masks.iter().all(|m| !m.is_empty()) {
            union_all(&mut acc, &masks);
        }
    }
    acc
}

/// Outcome of one fault update, for tracing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PairSummary {
    pub e: NibbleSet,
    pub e_prime: NibbleSet,
}

pub(crate) fn update_branch7(c: &CipherState, cf: &CipherState, state: &mut CandidateState) -> Result<PairSummary> {
    let dc = c.diff(cf);
    if dc.is_zero() {
        return Err(Error::PairRejected(
            "correct and faulty ciphertexts are identical".into(),
        ));
    }
    let pairs = candidate_pairs(&dc);
    if pairs.is_empty() {
        return Err(Error::Inconsistent("no (e, e') pair fits the difference".into()));
    }
    let union = rk29_union(c, &dc, &pairs);
    if union.iter().any(|m| m.is_empty()) {
        return Err(Error::Inconsistent("every (e, e') pair empties an RK29 nibble".into()));
    }
    intersect_all(&mut state.rk29, &union);
    state.stored.push(StoredFault {
        correct: *c,
        faulty: *cf,
        branch: 7,
    });
    let mut summary = PairSummary::default();
    for (e, ep) in pairs {
        summary.e.insert(e);
        summary.e_prime.insert(ep);
    }
    Ok(summary)
}

/// Processes one fault at round 27, branch 7: narrows `RK^29` and stores the
/// pair for the `RK^28` stage.
pub fn m2_update(c: &CipherState, cf: &CipherState, state: &mut CandidateState) -> Result<()> {
    update_branch7(c, cf, state).map(|_| ())
}

/// Whether `rk29` fits the stored fault under at least one of its candidate
/// `(e, e')` explanations.
pub(crate) fn consistent_with_rk29(f: &StoredFault, rk29: &RoundKey) -> bool {
    let dc = f.correct.diff(&f.faulty);
    match f.branch {
        7 => candidate_pairs(&dc)
            .into_iter()
            .any(|(e, ep)| admits(&round_key_masks(&f.correct, &dc, &round29_left_diff(7, e, ep)), rk29)),
        b => super::model3::fault_values(b, &dc).is_ok_and(|(e, eps)| {
            eps.iter()
                .any(|ep| admits(&round_key_masks(&f.correct, &dc, &round29_left_diff(b, e, ep)), rk29))
        }),
    }
}

/// `RK^28` candidates from one stored fault, given `RK^29`.
pub(crate) fn rk28_masks(f: &StoredFault, rk29: &RoundKey) -> Option<[NibbleSet; 8]> {
    let (y, yf) = peel_last_round(&f.correct, &f.faulty, rk29);
    let dy = y.diff(&yf);
    let e = fault_value_from_round28(f.branch, &dy);
    if e == 0 {
        return None;
    }
    let masks = round_key_masks(&y, &dy, &round28_left_diff(f.branch, e));
    masks.iter().all(|m| !m.is_empty()).then_some(masks)
}

/// Replays every stored fault through the last round with `rk29` and narrows
/// `RK^28`. Faults with no explanation under `rk29` are skipped; the number
/// of skipped faults is returned.
pub fn m2_recover_rk28(state: &mut CandidateState, rk29: &RoundKey) -> Result<usize> {
    let mut skipped = 0;
    let mut masks = state.rk28;
    for f in &state.stored {
        match consistent_with_rk29(f, rk29).then(|| rk28_masks(f, rk29)).flatten() {
            Some(m) => intersect_all(&mut masks, &m),
            None => skipped += 1,
        }
    }
    if let Some(i) = masks.iter().position(|m| m.is_empty()) {
        return Err(Error::Inconsistent(format!(
            "stored faults disagree on RK28 nibble {i}"
        )));
    }
    state.rk28 = masks;
    Ok(skipped)
}
