//! Two-phase attack: faults at round-28 branch 7 recover `RK^29`, then faults
//! at round-27 branch 7 recover `RK^28` one round further in.

use super::constraints::{
    fault_value_from_round28, intersect_all, peel_last_round, round28_left_diff, round29_left_diff_from_round28,
    round_key_masks,
};
use super::CandidateState;
use crate::cipher::{CipherState, RoundKey};
use crate::differential::possible;
use crate::error::{Error, Result};

fn check_masks(masks: &[crate::differential::NibbleSet; 8], round: usize) -> Result<()> {
    match masks.iter().position(|m| m.is_empty()) {
        Some(i) => Err(Error::Inconsistent(format!(
            "no RK{round} nibble {i} value explains the difference"
        ))),
        None => Ok(()),
    }
}

/// Phase 1: `c`/`cf` from a fault at round 28, branch 7.
///
/// The fault value is `e = dC0` and S-box 0 of round 28 outputs `dC4`.
pub fn m1_update_rk29(c: &CipherState, cf: &CipherState, state: &mut CandidateState) -> Result<()> {
    let dc = c.diff(cf);
    let e = dc.cell(0);
    if e == 0 {
        return Err(Error::PairRejected("dC0 = 0, the fault did not reach branch 7".into()));
    }
    if !possible(e, dc.cell(4)) {
        return Err(Error::Inconsistent(format!(
            "DDT[{e:x}][{:x}] = 0 for the round-28 S-box",
            dc.cell(4)
        )));
    }
    let masks = round_key_masks(c, &dc, &round29_left_diff_from_round28(e));
    check_masks(&masks, 29)?;
    intersect_all(&mut state.rk29, &masks);
    Ok(())
}

/// Phase 2 for one pair: `c`/`cf` from a fault at round 27, branch 7.
pub fn m1_update_rk28(c: &CipherState, cf: &CipherState, rk29: &RoundKey, state: &mut CandidateState) -> Result<()> {
    if c == cf {
        return Err(Error::PairRejected(
            "correct and faulty ciphertexts are identical".into(),
        ));
    }
    let (y, yf) = peel_last_round(c, cf, rk29);
    let dy = y.diff(&yf);
    let e = fault_value_from_round28(7, &dy);
    if e == 0 {
        return Err(Error::PairRejected("no difference reaches round-28 branch 7".into()));
    }
    let masks = round_key_masks(&y, &dy, &round28_left_diff(7, e));
    check_masks(&masks, 28)?;
    intersect_all(&mut state.rk28, &masks);
    Ok(())
}

/// Phase 2 over all pairs. Returns the number of pairs that were used.
pub fn m1_recover_rk28(
    pairs: &[(CipherState, CipherState)],
    rk29: &RoundKey,
    state: &mut CandidateState,
) -> Result<usize> {
    let mut used = 0;
    for (c, cf) in pairs {
        m1_update_rk28(c, cf, rk29, state)?;
        used += 1;
    }
    Ok(used)
}
