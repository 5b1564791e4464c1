//! Difference bookkeeping shared by all three attacks.

use crate::cipher::{permute, permute_inv, round_decrypt, CipherState, RoundKey};
use crate::differential::{key_candidates, NibbleSet};

/// Round the round-27 attacks inject into.
pub const FAULT_ROUND: usize = 27;

/// Per-nibble key candidates for one round, given that round's output `y`
/// (before the permutation), the output difference `dy`, and the difference
/// `dx_left[i]` of input cell `8 + i`.
///
/// S-box `i` sees input difference `dy[7 - i]` and output difference
/// `dy[8 + i] ^ dx_left[i] ^ l_i`, where `l_i` is the linear-layer term.
pub fn round_key_masks(y: &CipherState, dy: &CipherState, dx_left: &[u8; 8]) -> [NibbleSet; 8] {
    let d = dy.cells();
    let x7 = d[7];
    let all = d[1..8].iter().fold(0u8, |acc, v| acc ^ v);
    let mut out = [NibbleSet::EMPTY; 8];
    for (i, m) in out.iter_mut().enumerate() {
        let lin = match i {
            0 => 0,
            7 => all,
            _ => x7,
        };
        let beta = d[8 + i] ^ dx_left[i] ^ lin;
        *m = key_candidates(d[7 - i], beta, y.cell(7 - i));
    }
    out
}

/// Difference entering round 28 after a fault `e` at round-27 branch `branch`
/// (`0..=7`) whose S-box produced `e_prime`.
pub fn round28_input_diff(branch: usize, e: u8, e_prime: u8) -> CipherState {
    debug_assert!(branch < 8);
    let mut d = [0u8; 16];
    d[branch] = e;
    d[15 - branch] ^= e_prime;
    let x7 = d[7];
    for c in &mut d[9..15] {
        *c ^= x7;
    }
    d[15] ^= d[1..8].iter().fold(0u8, |acc, v| acc ^ v);
    permute(&CipherState::from_cells(d).expect("nibbles"))
}

/// Left-half input difference of round 29, as a function of the round-27 fault.
/// Round 28 keeps its right half, which the permutation moves entirely left.
pub fn round29_left_diff(branch: usize, e: u8, e_prime: u8) -> [u8; 8] {
    let x28 = round28_input_diff(branch, e, e_prime);
    let shifted = permute(
        &CipherState::from_cells({
            let mut c = [0u8; 16];
            c[..8].copy_from_slice(&x28.cells()[..8]);
            c
        })
        .expect("nibbles"),
    );
    let mut out = [0u8; 8];
    out.copy_from_slice(&shifted.cells()[8..]);
    out
}

/// Left-half input difference of round 28. Only `e` reaches it.
pub fn round28_left_diff(branch: usize, e: u8) -> [u8; 8] {
    let x28 = round28_input_diff(branch, e, 0);
    let mut out = [0u8; 8];
    out.copy_from_slice(&x28.cells()[8..]);
    out
}

/// Left-half input difference of round 29 after a fault `e` at round-28 branch 7.
pub fn round29_left_diff_from_round28(e: u8) -> [u8; 8] {
    let mut out = [0u8; 8];
    out[7] = e;
    out
}

/// Round-28 outputs (before the permutation) for a correct/faulty ciphertext pair.
pub fn peel_last_round(c: &CipherState, cf: &CipherState, rk29: &RoundKey) -> (CipherState, CipherState) {
    let y = permute_inv(&round_decrypt(c, rk29, false));
    let yf = permute_inv(&round_decrypt(cf, rk29, false));
    (y, yf)
}

/// The fault value of a round-27 fault, read from the round-28 output difference.
pub fn fault_value_from_round28(branch: usize, dy28: &CipherState) -> u8 {
    if branch == 0 {
        dy28.cell(13) ^ dy28.cell(7)
    } else {
        dy28.cell(7)
    }
}

pub fn intersect_all(masks: &mut [NibbleSet; 8], with: &[NibbleSet; 8]) {
    for (m, w) in masks.iter_mut().zip(with) {
        *m = m.intersect(*w);
    }
}

pub fn union_all(masks: &mut [NibbleSet; 8], with: &[NibbleSet; 8]) {
    for (m, w) in masks.iter_mut().zip(with) {
        *m = m.union(*w);
    }
}

pub fn admits(masks: &[NibbleSet; 8], rk: &RoundKey) -> bool {
    masks.iter().zip(rk.nibbles()).all(|(m, &k)| m.contains(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::sbox;
    use crate::cipher::{encrypt, round_encrypt, ROUNDS};
    use crate::fault::{faulty_encrypt, FaultSpec};
    use crate::key_schedule::{expand_key, MasterKey};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round28_diff_matches_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let rks = expand_key(&MasterKey::from_u128(rng.random()));
            let x27 = CipherState::from_u64(rng.random());
            let branch = rng.random_range(0..8);
            let e = rng.random_range(1..16u8);
            let xf = x27.with_xor(branch, e);
            let d = round_encrypt(&x27, &rks[27], true).diff(&round_encrypt(&xf, &rks[27], true));
            let k = rks[27].nibble(7 - branch);
            let e_prime = sbox(x27.cell(branch) ^ k) ^ sbox(xf.cell(branch) ^ k);
            assert_eq!(round28_input_diff(branch, e, e_prime), d);
            let left = round28_left_diff(branch, e);
            assert_eq!(&left[..], &d.cells()[8..]);
        }
    }

    #[test]
    fn true_keys_survive_last_round_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..300 {
            let rks = expand_key(&MasterKey::from_u128(rng.random()));
            let p = CipherState::from_u64(rng.random());
            let e = rng.random_range(1..16u8);
            let c = encrypt(&p, &rks).unwrap();
            let cf = faulty_encrypt(&p, &rks, &FaultSpec::new(28, 7, e).unwrap()).unwrap();
            let m = round_key_masks(&c, &c.diff(&cf), &round29_left_diff_from_round28(e));
            assert!(admits(&m, &rks[ROUNDS - 1]));
            assert!(m.iter().all(|s| s.len() < 16));
        }
    }

    #[test]
    fn peel_recovers_round28_output() {
        let rks = expand_key(&MasterKey::from_u128(0x55));
        let p = CipherState::from_u64(7);
        let c = encrypt(&p, &rks).unwrap();
        let (y, _) = peel_last_round(&c, &c, &rks[29]);
        let x28 = crate::cipher::encrypt_until(&p, &rks, 28);
        assert_eq!(y, round_encrypt(&x28, &rks[28], false));
    }
}
