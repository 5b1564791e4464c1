//! Fault propagation seen from the ciphertext.

use lilliput_dfa::attack::constraints::round28_input_diff;
use lilliput_dfa::cipher::round_decrypt;
use lilliput_dfa::differential::possible;
use lilliput_dfa::{encrypt, expand_key, faulty_encrypt, CipherState, FaultSpec, MasterKey, RoundKey};
use proptest::prelude::*;

/// Input of round 28, recovered from the ciphertext with the true keys.
fn round28_input(c: &CipherState, rks: &[RoundKey; 30]) -> CipherState {
    round_decrypt(&round_decrypt(c, &rks[29], false), &rks[28], true)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn round28_branch7_fault_shows_in_cell_0(k in any::<u128>(), p in any::<u64>(), e in 1u8..16) {
        let rks = expand_key(&MasterKey::from_u128(k));
        let p = CipherState::from_u64(p);
        let c = encrypt(&p, &rks).unwrap();
        let cf = faulty_encrypt(&p, &rks, &FaultSpec::new(28, 7, e).unwrap()).unwrap();
        prop_assert_eq!(c.diff(&cf).cell(0), e);
    }

    /// A round-27 fault reaches round 28 as the fault value plus one S-box
    /// output difference, spread by the linear and permutation layers.
    #[test]
    fn round27_fault_matches_predicted_round28_difference(
        k in any::<u128>(),
        p in any::<u64>(),
        e in 1u8..16,
        b in 0usize..8,
    ) {
        let rks = expand_key(&MasterKey::from_u128(k));
        let p = CipherState::from_u64(p);
        let c = encrypt(&p, &rks).unwrap();
        let cf = faulty_encrypt(&p, &rks, &FaultSpec::new(27, b, e).unwrap()).unwrap();
        let dx = round28_input(&c, &rks).diff(&round28_input(&cf, &rks));
        let fits: Vec<u8> = (1..16u8).filter(|&ep| round28_input_diff(b, e, ep) == dx).collect();
        prop_assert_eq!(fits.len(), 1, "dX28 = {}", dx);
        prop_assert!(possible(e, fits[0]));
    }
}
