//! The 80-bit LFSM key schedule, its GF(2) model, and inversion from the last
//! two round keys to the master key.
//!
//! State bit `4*j + t` is bit `t` of nibble `K_j`; `K_19` is the most
//! significant nibble and the leftmost hex digit.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::cipher::{encrypt_from, sbox, sbox_inv, CipherState, RoundKey, ROUNDS};
use crate::error::{parse_err, Error, Result};
use crate::gf2::{AffineSystem, BitMatrix};

pub const STATE_BITS: usize = 80;
const STATE_MASK: u128 = (1u128 << STATE_BITS) - 1;

/// Nibbles of the LFSM concatenated into `Z`, least significant first
/// (`Z = K18 || K16 || K13 || K10 || K9 || K6 || K3 || K1`).
const Z_SOURCES: [usize; 8] = [1, 3, 6, 9, 10, 13, 16, 18];

/// Largest kernel `invert_subkeys` is willing to enumerate.
pub const MAX_KERNEL_DIM: usize = 24;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LfsmState([u8; 20]);

impl LfsmState {
    pub fn from_u128(v: u128) -> Self {
        let mut k = [0u8; 20];
        for (j, n) in k.iter_mut().enumerate() {
            *n = ((v >> (4 * j)) & 0xF) as u8;
        }
        LfsmState(k)
    }

    pub fn to_u128(&self) -> u128 {
        self.0
            .iter()
            .enumerate()
            .fold(0u128, |acc, (j, &n)| acc | (u128::from(n) << (4 * j)))
    }

    pub fn from_nibbles(k: [u8; 20]) -> Result<Self> {
        if k.iter().any(|&n| n > 0xF) {
            return Err(parse_err("LFSM state", &format!("{k:?}"), "nibble exceeds 0xF"));
        }
        Ok(LfsmState(k))
    }

    pub fn nibbles(&self) -> &[u8; 20] {
        &self.0
    }
}

impl fmt::Display for LfsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:020x}", self.to_u128())
    }
}

impl fmt::Debug for LfsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LfsmState({self})")
    }
}

fn parse_80_bits(s: &str, what: &'static str) -> Result<u128> {
    let s = s.trim();
    let s = s.strip_prefix("0x").unwrap_or(s);
    if s.len() != 20 || !s.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(parse_err(what, s, "expected 20 hex digits"));
    }
    u128::from_str_radix(s, 16).map_err(|e| parse_err(what, s, e.to_string()))
}

impl FromStr for LfsmState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_80_bits(s, "LFSM state").map(LfsmState::from_u128)
    }
}

/// The 80-bit master key, i.e. the initial LFSM state.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MasterKey(pub LfsmState);

impl MasterKey {
    pub fn from_u128(v: u128) -> Self {
        MasterKey(LfsmState::from_u128(v & STATE_MASK))
    }

    pub fn to_u128(&self) -> u128 {
        self.0.to_u128()
    }
}

impl fmt::Display for MasterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for MasterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MasterKey({})", self.0)
    }
}

impl FromStr for MasterKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_80_bits(s, "master key").map(MasterKey::from_u128)
    }
}

/// One block update on `(K_{5i}, .., K_{5i+4})`, passed least significant first.
///
/// Block 0 is `K4' = K3, K3' = K2, K2' = K1 ^ (K2 >> 3), K1' = K0 ^ (K4 >>> 1),
/// K0' = K4`. The same form is applied to blocks 1..=3 (see README, "Key
/// schedule taps").
#[inline]
fn block_update(b: [u8; 5]) -> [u8; 5] {
    let [k0, k1, k2, k3, k4] = b;
    let rot = ((k4 >> 1) | (k4 << 3)) & 0xF;
    [k4, k0 ^ rot, k1 ^ (k2 >> 3), k2, k3]
}

pub fn lfsm_update(k: &LfsmState) -> LfsmState {
    let mut out = [0u8; 20];
    for blk in 0..4 {
        let b: [u8; 5] = k.0[5 * blk..5 * blk + 5].try_into().expect("5 nibbles");
        out[5 * blk..5 * blk + 5].copy_from_slice(&block_update(b));
    }
    LfsmState(out)
}

/// `Z` bits as a 32-bit word (bit `j` is `Z_j`).
fn z_word(k: &LfsmState) -> u32 {
    Z_SOURCES
        .iter()
        .enumerate()
        .fold(0u32, |acc, (m, &src)| acc | (u32::from(k.0[src]) << (4 * m)))
}

/// Rearranges `Z` so that nibble `i` is the S-box input `Z_i || Z_{i+8} || Z_{i+16} || Z_{i+24}`.
#[inline]
fn sbox_input_word(z: u32) -> u32 {
    let mut w = 0u32;
    for i in 0..8 {
        let b = |j: usize| (z >> j) & 1;
        let x = (b(i) << 3) | (b(i + 8) << 2) | (b(i + 16) << 1) | b(i + 24);
        w |= x << (4 * i);
    }
    w
}

#[inline]
fn round_constant(round: usize) -> u32 {
    (round as u32) << 27
}

fn round_key_from_inputs(w: u32, round: usize) -> RoundKey {
    let mut rk = 0u32;
    for i in 0..8 {
        rk |= u32::from(sbox(((w >> (4 * i)) & 0xF) as u8)) << (4 * i);
    }
    RoundKey::from_u32(rk ^ round_constant(round))
}

pub fn extract_round_key(k: &LfsmState, round: usize) -> Result<RoundKey> {
    if round >= ROUNDS {
        return Err(Error::RoundOutOfRange(round));
    }
    Ok(round_key_from_inputs(sbox_input_word(z_word(k)), round))
}

pub fn expand_key(mk: &MasterKey) -> [RoundKey; ROUNDS] {
    let mut rks = [RoundKey::default(); ROUNDS];
    let mut k = mk.0;
    for (r, rk) in rks.iter_mut().enumerate() {
        if r > 0 {
            k = lfsm_update(&k);
        }
        *rk = round_key_from_inputs(sbox_input_word(z_word(&k)), r);
    }
    rks
}

/// Exact GF(2) description of the key schedule's linear part.
#[derive(Clone, Debug)]
pub struct LinearModel {
    /// One LFSM update on state bits.
    pub update: BitMatrix,
    /// `extraction[j]` selects the state bit that becomes `Z_j`.
    pub extraction: [u128; 32],
}

impl LinearModel {
    /// Rows mapping master-key bits to the `Z` bits of round `round`.
    pub fn z_rows(&self, round: usize) -> [u128; 32] {
        let m = self.update.pow(round as u32);
        let mut rows = [0u128; 32];
        for (row, &sel) in rows.iter_mut().zip(&self.extraction) {
            *row = m.row(sel.trailing_zeros() as usize);
        }
        rows
    }
}

pub fn build_linear_model() -> LinearModel {
    let mut rows = vec![0u128; STATE_BITS];
    for c in 0..STATE_BITS {
        let image = lfsm_update(&LfsmState::from_u128(1u128 << c)).to_u128();
        for (b, row) in rows.iter_mut().enumerate() {
            if (image >> b) & 1 == 1 {
                *row |= 1u128 << c;
            }
        }
    }
    let mut extraction = [0u128; 32];
    for (j, e) in extraction.iter_mut().enumerate() {
        *e = 1u128 << (4 * Z_SOURCES[j / 4] + j % 4);
    }
    LinearModel {
        update: BitMatrix::from_rows(rows),
        extraction,
    }
}

fn linear_model() -> &'static LinearModel {
    static MODEL: OnceLock<LinearModel> = OnceLock::new();
    MODEL.get_or_init(build_linear_model)
}

/// A round key with some nibbles unknown. Text form is 8 hex digits, most
/// significant first, with `x` marking an unknown nibble (`4C4x4444`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PartialRoundKey([Option<u8>; 8]);

impl PartialRoundKey {
    pub fn new(nibbles: [Option<u8>; 8]) -> Result<Self> {
        if nibbles.iter().flatten().any(|&n| n > 0xF) {
            return Err(parse_err(
                "partial round key",
                &format!("{nibbles:?}"),
                "nibble exceeds 0xF",
            ));
        }
        Ok(PartialRoundKey(nibbles))
    }

    pub fn nibble(&self, i: usize) -> Option<u8> {
        self.0[i]
    }

    pub fn nibbles(&self) -> &[Option<u8>; 8] {
        &self.0
    }

    pub fn known_count(&self) -> usize {
        self.0.iter().filter(|n| n.is_some()).count()
    }

    pub fn without(mut self, i: usize) -> Self {
        self.0[i] = None;
        self
    }

    /// `Some` only when all eight nibbles are known.
    pub fn complete(&self) -> Option<RoundKey> {
        let mut n = [0u8; 8];
        for (d, s) in n.iter_mut().zip(&self.0) {
            *d = (*s)?;
        }
        RoundKey::from_nibbles(n).ok()
    }
}

impl From<RoundKey> for PartialRoundKey {
    fn from(rk: RoundKey) -> Self {
        PartialRoundKey(rk.nibbles().map(Some))
    }
}

impl fmt::Display for PartialRoundKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in self.0.iter().rev() {
            match n {
                Some(v) => write!(f, "{v:x}")?,
                None => f.write_str("x")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for PartialRoundKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PartialRoundKey({self})")
    }
}

impl FromStr for PartialRoundKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let s = s.strip_prefix("0x").unwrap_or(s);
        if s.chars().count() != 8 {
            return Err(parse_err("partial round key", s, "expected 8 hex digits or 'x'"));
        }
        let mut out = [None; 8];
        for (pos, ch) in s.chars().enumerate() {
            out[7 - pos] = match ch {
                'x' | 'X' => None,
                c => Some(
                    c.to_digit(16)
                        .ok_or_else(|| parse_err("partial round key", s, format!("bad digit {c:?}")))?
                        as u8,
                ),
            };
        }
        Ok(PartialRoundKey(out))
    }
}

/// A known plaintext/ciphertext pair under the target key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Anchor {
    pub plaintext: CipherState,
    pub ciphertext: CipherState,
}

/// Affine constraints on the master key implied by known round-key nibbles.
pub fn subkey_system(constraints: &[(usize, PartialRoundKey)]) -> Result<AffineSystem> {
    let model = linear_model();
    let mut sys = AffineSystem::new(STATE_BITS);
    for &(round, ref prk) in constraints {
        if round >= ROUNDS {
            return Err(Error::RoundOutOfRange(round));
        }
        let rows = model.z_rows(round);
        let constant = round_constant(round);
        for i in 0..8 {
            let Some(v) = prk.nibble(i) else { continue };
            let x = sbox_inv(v ^ ((constant >> (4 * i)) & 0xF) as u8);
            for (bit, z) in [(3, i), (2, i + 8), (1, i + 16), (0, i + 24)] {
                sys.push(rows[z], (x >> bit) & 1 == 1);
            }
        }
    }
    Ok(sys)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InversionOutcome {
    pub key: MasterKey,
    pub rank: usize,
    pub kernel_dim: usize,
    /// Position of the verified candidate in the enumeration order, counting from 1.
    pub tried: u64,
}

/// S-box input words of all 30 rounds; linear in the master key.
fn sbox_inputs_for(k: u128) -> [u32; ROUNDS] {
    let mut out = [0u32; ROUNDS];
    let mut s = LfsmState::from_u128(k);
    for (r, w) in out.iter_mut().enumerate() {
        if r > 0 {
            s = lfsm_update(&s);
        }
        *w = sbox_input_word(z_word(&s));
    }
    out
}

fn verifies(words: &[u32; ROUNDS], anchor: &Anchor) -> bool {
    let mut rks = [RoundKey::default(); ROUNDS];
    for (r, rk) in rks.iter_mut().enumerate() {
        *rk = round_key_from_inputs(words[r], r);
    }
    encrypt_from(&anchor.plaintext, &rks, 0) == anchor.ciphertext
}

/// Gray-code walk of `base ^ span(basis)`; returns the first candidate that
/// reproduces the anchor and the number of candidates tried.
fn walk_coset(
    base: &[u32; ROUNDS],
    base_key: u128,
    basis: &[([u32; ROUNDS], u128)],
    anchor: &Anchor,
) -> (Option<u128>, u64) {
    let mut words = *base;
    let mut key = base_key;
    let total = 1u64 << basis.len();
    for step in 0..total {
        if step > 0 {
            let flip = step.trailing_zeros() as usize;
            let (dw, dk) = &basis[flip];
            for (w, d) in words.iter_mut().zip(dw) {
                *w ^= d;
            }
            key ^= dk;
        }
        if verifies(&words, anchor) {
            return (Some(key), step + 1);
        }
    }
    (None, total)
}

/// Recovers the master key from `RK^29` and a possibly partial `RK^28`.
///
/// Known nibbles are turned into affine equations on the master key, the
/// system is solved, and the solution coset is searched for the candidate
/// that maps `anchor.plaintext` to `anchor.ciphertext`.
pub fn invert_subkeys(rk29: &RoundKey, rk28: &PartialRoundKey, anchor: &Anchor) -> Result<InversionOutcome> {
    let sys = subkey_system(&[(29, PartialRoundKey::from(*rk29)), (28, *rk28)])?;
    let rank = sys.rank();
    let sol = sys.solve().ok_or(Error::NoCandidateVerifies { rank, tried: 0 })?;
    let kernel_dim = sol.kernel.len();
    if kernel_dim > MAX_KERNEL_DIM {
        return Err(Error::KernelTooLarge {
            kernel_dim,
            limit: MAX_KERNEL_DIM,
        });
    }

    // The top free variables select a chunk; each chunk is walked in Gray order.
    let split = kernel_dim.min(6);
    let (outer, inner) = sol.kernel.split_at(split);
    let inner: Vec<([u32; ROUNDS], u128)> = inner.iter().map(|&v| (sbox_inputs_for(v), v)).collect();
    let inner_size = 1u64 << inner.len();
    let found = (0..1u64 << split).into_par_iter().find_map_first(|chunk| {
        let mut key = sol.particular;
        for (i, v) in outer.iter().enumerate() {
            if (chunk >> i) & 1 == 1 {
                key ^= v;
            }
        }
        let (hit, steps) = walk_coset(&sbox_inputs_for(key), key, &inner, anchor);
        hit.map(|k| (k, chunk * inner_size + steps))
    });

    if let Some((k, tried)) = found {
        return Ok(InversionOutcome {
            key: MasterKey::from_u128(k),
            rank,
            kernel_dim,
            tried,
        });
    }
    let tried = 1u64 << kernel_dim;
    Err(Error::NoCandidateVerifies { rank, tried })
}
