//! The LILLIPUT block cipher: 64-bit block, 16 nibble branches, 30 rounds.
//!
//! A round is `NonLinearLayer`, `LinearLayer`, `PermutationLayer`; the last
//! round skips the permutation. Cell 15 is the most significant nibble of the
//! block and the leftmost hex digit.
//!
//! The linear layer follows the reference implementation of LILLIPUT:
//! branches 9..=14 absorb `X7`, and branch 15 absorbs `X1 ^ ... ^ X7`.
//! XORing each `X_i` into its own left branch instead would break the
//! fault-propagation patterns the attacks rely on.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{parse_err, Error, Result};

pub const ROUNDS: usize = 30;

pub const SBOX: [u8; 16] = [
    0x4, 0x8, 0x7, 0x1, 0x9, 0x3, 0x2, 0xE, 0x0, 0xB, 0x6, 0xF, 0xA, 0x5, 0xD, 0xC,
];

pub const SBOX_INV: [u8; 16] = invert_table(&SBOX);

/// `PERMUTATION[i]` is the destination of cell `i`: `X^{r+1}[pi(i)] = Y^r[i]`.
pub const PERMUTATION: [usize; 16] = [13, 9, 14, 8, 10, 11, 12, 15, 4, 5, 3, 1, 2, 6, 0, 7];

pub const PERMUTATION_INV: [usize; 16] = {
    let mut inv = [0usize; 16];
    let mut i = 0;
    while i < 16 {
        inv[PERMUTATION[i]] = i;
        i += 1;
    }
    inv
};

const fn invert_table(table: &[u8; 16]) -> [u8; 16] {
    let mut inv = [0u8; 16];
    let mut i = 0;
    while i < 16 {
        inv[table[i] as usize] = i as u8;
        i += 1;
    }
    inv
}

/// A 4-bit value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Nibble(u8);

impl Nibble {
    pub const ZERO: Nibble = Nibble(0);

    pub fn new(value: u8) -> Result<Self> {
        if value < 16 {
            Ok(Nibble(value))
        } else {
            Err(parse_err("nibble", &value.to_string(), "value must be below 16"))
        }
    }

    #[inline]
    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Nibble {
    type Error = Error;
    fn try_from(value: u8) -> Result<Self> {
        Nibble::new(value)
    }
}

impl From<Nibble> for u8 {
    fn from(n: Nibble) -> u8 {
        n.0
    }
}

impl fmt::Display for Nibble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:X}", self.0)
    }
}

#[inline]
pub fn sbox(x: u8) -> u8 {
    SBOX[(x & 0xF) as usize]
}

#[inline]
pub fn sbox_inv(y: u8) -> u8 {
    SBOX_INV[(y & 0xF) as usize]
}

/// The 64-bit state between rounds, one nibble per cell.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CipherState([u8; 16]);

impl CipherState {
    pub const ZERO: CipherState = CipherState([0; 16]);

    pub fn from_u64(v: u64) -> Self {
        let mut cells = [0u8; 16];
        for (i, c) in cells.iter_mut().enumerate() {
            *c = ((v >> (4 * i)) & 0xF) as u8;
        }
        CipherState(cells)
    }

    pub fn to_u64(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &c)| acc | (u64::from(c) << (4 * i)))
    }

    pub fn from_cells(cells: [u8; 16]) -> Result<Self> {
        if let Some(bad) = cells.iter().find(|&&c| c > 0xF) {
            return Err(parse_err(
                "cipher state",
                &format!("{cells:?}"),
                format!("cell value {bad} exceeds a nibble"),
            ));
        }
        Ok(CipherState(cells))
    }

    #[inline]
    pub fn cells(&self) -> &[u8; 16] {
        &self.0
    }

    #[inline]
    pub fn cell(&self, i: usize) -> u8 {
        self.0[i]
    }

    /// Returns a copy with `value` XORed into cell `i`.
    pub fn with_xor(mut self, i: usize, value: u8) -> Self {
        self.0[i] ^= value & 0xF;
        self
    }

    /// Cell-wise XOR difference.
    pub fn diff(&self, other: &CipherState) -> CipherState {
        let mut out = [0u8; 16];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(other.0.iter())) {
            *o = a ^ b;
        }
        CipherState(out)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl fmt::Display for CipherState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.to_u64())
    }
}

impl fmt::Debug for CipherState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CipherState({self})")
    }
}

impl FromStr for CipherState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let s = s.strip_prefix("0x").unwrap_or(s);
        if s.len() != 16 || !s.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(parse_err("64-bit block", s, "expected 16 hex digits"));
        }
        u64::from_str_radix(s, 16)
            .map(CipherState::from_u64)
            .map_err(|e| parse_err("64-bit block", s, e.to_string()))
    }
}

/// A 32-bit round key; nibble `i` is `RK_i` and feeds S-box `S_i`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RoundKey([u8; 8]);

impl RoundKey {
    pub fn from_u32(v: u32) -> Self {
        let mut n = [0u8; 8];
        for (i, c) in n.iter_mut().enumerate() {
            *c = ((v >> (4 * i)) & 0xF) as u8;
        }
        RoundKey(n)
    }

    pub fn to_u32(&self) -> u32 {
        self.0
            .iter()
            .enumerate()
            .fold(0u32, |acc, (i, &c)| acc | (u32::from(c) << (4 * i)))
    }

    pub fn from_nibbles(nibbles: [u8; 8]) -> Result<Self> {
        if nibbles.iter().any(|&c| c > 0xF) {
            return Err(parse_err("round key", &format!("{nibbles:?}"), "nibble exceeds 0xF"));
        }
        Ok(RoundKey(nibbles))
    }

    #[inline]
    pub fn nibbles(&self) -> &[u8; 8] {
        &self.0
    }

    #[inline]
    pub fn nibble(&self, i: usize) -> u8 {
        self.0[i]
    }
}

impl fmt::Display for RoundKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08x}", self.to_u32())
    }
}

impl fmt::Debug for RoundKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RoundKey({self})")
    }
}

impl FromStr for RoundKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let s = s.strip_prefix("0x").unwrap_or(s);
        if s.len() != 8 || !s.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(parse_err("round key", s, "expected 8 hex digits"));
        }
        u32::from_str_radix(s, 16)
            .map(RoundKey::from_u32)
            .map_err(|e| parse_err("round key", s, e.to_string()))
    }
}

pub fn permute(s: &CipherState) -> CipherState {
    let mut out = [0u8; 16];
    for (i, &c) in s.0.iter().enumerate() {
        out[PERMUTATION[i]] = c;
    }
    CipherState(out)
}

pub fn permute_inv(s: &CipherState) -> CipherState {
    let mut out = [0u8; 16];
    for (i, o) in out.iter_mut().enumerate() {
        *o = s.0[PERMUTATION[i]];
    }
    CipherState(out)
}

/// Nonlinear and linear layers. Both only XOR into cells 8..=15 as a
/// function of cells 0..=7, so applying this twice is the identity.
#[inline]
fn feistel_layers(x: &mut [u8; 16], rk: &[u8; 8]) {
    for i in 0..8 {
        x[8 + i] ^= SBOX[(x[7 - i] ^ rk[i]) as usize];
    }
    let x7 = x[7];
    for cell in &mut x[9..15] {
        *cell ^= x7;
    }
    x[15] ^= x[1] ^ x[2] ^ x[3] ^ x[4] ^ x[5] ^ x[6] ^ x7;
}

pub fn round_encrypt(s: &CipherState, rk: &RoundKey, apply_permutation: bool) -> CipherState {
    let mut x = s.0;
    feistel_layers(&mut x, &rk.0);
    let y = CipherState(x);
    if apply_permutation {
        permute(&y)
    } else {
        y
    }
}

pub fn round_decrypt(s: &CipherState, rk: &RoundKey, apply_permutation: bool) -> CipherState {
    let mut y = if apply_permutation { permute_inv(s) } else { *s };
    feistel_layers(&mut y.0, &rk.0);
    y
}

fn check_round_keys(rks: &[RoundKey]) -> Result<()> {
    if rks.len() != ROUNDS {
        return Err(Error::RoundKeyCount {
            expected: ROUNDS,
            actual: rks.len(),
        });
    }
    Ok(())
}

/// Runs rounds `start..30` on `state`, which must be the input of round `start`.
pub(crate) fn encrypt_from(state: &CipherState, rks: &[RoundKey], start: usize) -> CipherState {
    let mut x = state.0;
    for (r, rk) in rks.iter().enumerate().take(ROUNDS).skip(start) {
        feistel_layers(&mut x, &rk.0);
        if r != ROUNDS - 1 {
            let y = x;
            for (i, &c) in y.iter().enumerate() {
                x[PERMUTATION[i]] = c;
            }
        }
    }
    CipherState(x)
}

/// Runs rounds `0..end`, returning the input state of round `end`.
pub(crate) fn encrypt_until(p: &CipherState, rks: &[RoundKey], end: usize) -> CipherState {
    let mut s = *p;
    for (r, rk) in rks.iter().enumerate().take(end) {
        s = round_encrypt(&s, rk, r != ROUNDS - 1);
    }
    s
}

pub fn encrypt(p: &CipherState, rks: &[RoundKey]) -> Result<CipherState> {
    check_round_keys(rks)?;
    Ok(encrypt_from(p, rks, 0))
}

pub fn decrypt(c: &CipherState, rks: &[RoundKey]) -> Result<CipherState> {
    check_round_keys(rks)?;
    let mut s = *c;
    for r in (0..ROUNDS).rev() {
        s = round_decrypt(&s, &rks[r], r != ROUNDS - 1);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sbox_matches_truth_table() {
        assert_eq!(sbox(0x0), 0x4);
        assert_eq!(sbox(0x7), 0xE);
        assert_eq!(sbox_inv(0x4), 0x0);
        assert_eq!(sbox_inv(0xC), 0xF);
        for y in 0..16u8 {
            assert_eq!(sbox(sbox_inv(y)), y);
            assert_eq!(sbox_inv(sbox(y)), y);
        }
    }

    #[test]
    fn permutation_positions() {
        let s = CipherState::ZERO.with_xor(0, 0xA).with_xor(7, 0x3);
        let p = permute(&s);
        assert_eq!(p.cell(13), 0xA);
        assert_eq!(p.cell(15), 0x3);
        let mut seen = [false; 16];
        for &d in &PERMUTATION {
            seen[d] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn zero_round_gives_sbox_of_zero_on_left_half() {
        let y = round_encrypt(&CipherState::ZERO, &RoundKey::default(), false);
        for i in 0..8 {
            assert_eq!(y.cell(i), 0);
            assert_eq!(y.cell(8 + i), 0x4);
        }
    }

    #[test]
    fn right_half_survives_feistel_layers() {
        let s = CipherState::from_u64(0x0123_4567_89ab_cdef);
        let y = round_encrypt(&s, &RoundKey::from_u32(0xdead_beef), false);
        assert_eq!(&y.cells()[..8], &s.cells()[..8]);
    }

    #[test]
    fn difference_in_x7_reaches_every_left_branch() {
        // One-round view of a fault at X7: right half keeps e, branch 8 gets
        // the S-box output difference, branches 9..=15 get e.
        let s = CipherState::from_u64(0x1122_3344_5566_7788);
        let rk = RoundKey::from_u32(0x0f1e_2d3c);
        let e = 0x6;
        let dy = round_encrypt(&s, &rk, false).diff(&round_encrypt(&s.with_xor(7, e), &rk, false));
        assert_eq!(dy.cell(7), e);
        for i in 0..7 {
            assert_eq!(dy.cell(i), 0);
        }
        assert_ne!(dy.cell(8), 0);
        for i in 9..16 {
            assert_eq!(dy.cell(i), e, "branch {i}");
        }
    }

    #[test]
    fn hex_round_trip_and_errors() {
        let s: CipherState = "0123456789abcdef".parse().unwrap();
        assert_eq!(s.cell(15), 0x0);
        assert_eq!(s.cell(0), 0xf);
        assert_eq!(s.to_string(), "0123456789abcdef");
        assert!("0123".parse::<CipherState>().is_err());
        assert!("0123456789abcdeg".parse::<CipherState>().is_err());
        assert!("4c444444".parse::<RoundKey>().is_ok());
        assert!(CipherState::from_cells([16; 16]).is_err());
        assert!(Nibble::new(16).is_err());
    }

    #[test]
    fn wrong_round_key_count_is_rejected() {
        let rks = vec![RoundKey::default(); 29];
        assert!(matches!(
            encrypt(&CipherState::ZERO, &rks),
            Err(Error::RoundKeyCount {
                expected: 30,
                actual: 29
            })
        ));
        assert!(decrypt(&CipherState::ZERO, &rks).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_single_round(s in any::<u64>(), rk in any::<u32>(), flag in any::<bool>()) {
            let s = CipherState::from_u64(s);
            let rk = RoundKey::from_u32(rk);
            prop_assert_eq!(round_decrypt(&round_encrypt(&s, &rk, flag), &rk, flag), s);
        }

        #[test]
        fn permutation_round_trip(s in any::<u64>()) {
            let s = CipherState::from_u64(s);
            prop_assert_eq!(permute_inv(&permute(&s)), s);
        }

        #[test]
        fn two_rounds_round_trip(s in any::<u64>(), a in any::<u32>(), b in any::<u32>()) {
            let s = CipherState::from_u64(s);
            let (a, b) = (RoundKey::from_u32(a), RoundKey::from_u32(b));
            let c = round_encrypt(&round_encrypt(&s, &a, true), &b, true);
            prop_assert_eq!(round_decrypt(&round_decrypt(&c, &b, true), &a, true), s);
        }
    }
}
