//! Difference distribution table of the S-box and the candidate sets built
//! from it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cipher::{PERMUTATION, ROUNDS, SBOX};

/// Set of nibble values as a 16-bit membership mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NibbleSet(u16);

impl NibbleSet {
    pub const EMPTY: NibbleSet = NibbleSet(0);
    pub const FULL: NibbleSet = NibbleSet(0xFFFF);
    /// `{1, .., 15}`.
    pub const NONZERO: NibbleSet = NibbleSet(0xFFFE);

    pub const fn from_mask(mask: u16) -> Self {
        NibbleSet(mask)
    }

    pub const fn singleton(v: u8) -> Self {
        NibbleSet(1 << (v & 0xF))
    }

    pub const fn mask(self) -> u16 {
        self.0
    }

    pub const fn contains(self, v: u8) -> bool {
        v < 16 && (self.0 >> v) & 1 == 1
    }

    pub const fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn is_singleton(self) -> bool {
        self.0.count_ones() == 1
    }

    /// The element of a singleton set.
    pub const fn single(self) -> Option<u8> {
        if self.is_singleton() {
            Some(self.0.trailing_zeros() as u8)
        } else {
            None
        }
    }

    pub const fn intersect(self, other: NibbleSet) -> Self {
        NibbleSet(self.0 & other.0)
    }

    pub const fn union(self, other: NibbleSet) -> Self {
        NibbleSet(self.0 | other.0)
    }

    pub fn insert(&mut self, v: u8) {
        self.0 |= 1 << (v & 0xF);
    }

    /// `{x ^ k : x in self}`.
    pub fn xor(self, k: u8) -> Self {
        let k = k & 0xF;
        if k == 0 {
            return self;
        }
        let mut out = 0u16;
        let mut bits = self.0;
        while bits != 0 {
            let x = bits.trailing_zeros() as u8;
            out |= 1 << (x ^ k);
            bits &= bits - 1;
        }
        NibbleSet(out)
    }

    pub fn iter(self) -> impl Iterator<Item = u8> {
        (0u8..16).filter(move |&v| self.contains(v))
    }
}

impl FromIterator<u8> for NibbleSet {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        let mut s = NibbleSet::EMPTY;
        for v in iter {
            s.insert(v);
        }
        s
    }
}

impl fmt::Debug for NibbleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (n, v) in self.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v:x}")?;
        }
        f.write_str("}")
    }
}

/// `counts[a][b] = |{x : S(x) ^ S(x ^ a) = b}|`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct DdtTable {
    pub counts: [[u8; 16]; 16],
}

impl DdtTable {
    pub fn get(&self, a: u8, b: u8) -> u8 {
        self.counts[a as usize][b as usize]
    }

    /// `DDT[a][b] > 0`.
    pub fn possible(&self, a: u8, b: u8) -> bool {
        self.get(a, b) > 0
    }
}

impl fmt::Display for DdtTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a\\b")?;
        for b in 0..16 {
            write!(f, " {b:>2X}")?;
        }
        writeln!(f)?;
        for (a, row) in self.counts.iter().enumerate() {
            write!(f, "{a:>3X}")?;
            for c in row {
                write!(f, " {c:>2}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

struct Tables {
    ddt: DdtTable,
    /// `inputs[a][b]`: the preimage set `IN(a, b)`.
    inputs: [[NibbleSet; 16]; 16],
    /// `outputs[a]`: all `b` with `DDT[a][b] > 0`.
    outputs: [NibbleSet; 16],
}

const fn build_tables() -> Tables {
    let mut counts = [[0u8; 16]; 16];
    let mut inputs = [[NibbleSet::EMPTY; 16]; 16];
    let mut outputs = [NibbleSet::EMPTY; 16];
    let mut a = 0;
    while a < 16 {
        let mut x = 0;
        while x < 16 {
            let b = (SBOX[x] ^ SBOX[x ^ a]) as usize;
            counts[a][b] += 1;
            inputs[a][b] = NibbleSet(inputs[a][b].0 | (1 << x));
            outputs[a] = NibbleSet(outputs[a].0 | (1 << b));
            x += 1;
        }
        a += 1;
    }
    Tables {
        ddt: DdtTable { counts },
        inputs,
        outputs,
    }
}

static TABLES: Tables = build_tables();

pub fn compute_ddt() -> DdtTable {
    build_tables().ddt
}

/// Shared, precomputed table.
pub fn ddt() -> &'static DdtTable {
    &TABLES.ddt
}

/// `IN(a, b) = {x : S(x) ^ S(x ^ a) = b}`.
#[inline]
pub fn in_set(a: u8, b: u8) -> NibbleSet {
    TABLES.inputs[(a & 0xF) as usize][(b & 0xF) as usize]
}

/// Output differences reachable from input difference `a`.
#[inline]
pub fn row_outputs(a: u8) -> NibbleSet {
    TABLES.outputs[(a & 0xF) as usize]
}

#[inline]
pub fn possible(a: u8, b: u8) -> bool {
    TABLES.ddt.counts[(a & 0xF) as usize][(b & 0xF) as usize] > 0
}

/// Key nibbles `k` with `S(input ^ k) ^ S(input ^ k ^ a) = b`, i.e. `input ^ IN(a, b)`.
#[inline]
pub fn key_candidates(a: u8, b: u8, known_input: u8) -> NibbleSet {
    in_set(a, b).xor(known_input)
}

/// Active S-boxes `(round, i)` when a single cell `branch` of the input of
/// `round` carries a difference, propagated to the end of the cipher at the
/// truncated level (a XOR of active cells is taken to be active).
pub fn truncated_trail(round: usize, branch: usize) -> Vec<(usize, usize)> {
    let mut active = [false; 16];
    active[branch] = true;
    let mut out = Vec::new();
    for r in round..ROUNDS {
        let mut y = active;
        for i in 0..8 {
            if active[7 - i] {
                out.push((r, i));
                y[8 + i] = true;
            }
        }
        if active[7] {
            for c in &mut y[9..15] {
                *c = true;
            }
        }
        if active[1..8].iter().any(|&a| a) {
            y[15] = true;
        }
        if r == ROUNDS - 1 {
            break;
        }
        for (i, &a) in y.iter().enumerate() {
            active[PERMUTATION[i]] = a;
        }
    }
    out
}
