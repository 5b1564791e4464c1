//! Dense GF(2) linear algebra on up to 128 unknowns, one `u128` per row.

/// `parity(row & x)`: the dot product over GF(2).
#[inline]
pub fn dot(row: u128, x: u128) -> bool {
    (row & x).count_ones() & 1 == 1
}

/// Square bit matrix acting on column vectors: `(M x)_i = dot(rows[i], x)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BitMatrix {
    rows: Vec<u128>,
}

impl BitMatrix {
    pub fn identity(n: usize) -> Self {
        assert!(n <= 128);
        BitMatrix {
            rows: (0..n).map(|i| 1u128 << i).collect(),
        }
    }

    pub fn from_rows(rows: Vec<u128>) -> Self {
        assert!(rows.len() <= 128);
        BitMatrix { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[u128] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> u128 {
        self.rows[i]
    }

    pub fn apply(&self, x: u128) -> u128 {
        self.rows
            .iter()
            .enumerate()
            .fold(0u128, |acc, (i, &r)| acc | (u128::from(dot(r, x)) << i))
    }

    /// `self * rhs`.
    pub fn mul(&self, rhs: &BitMatrix) -> BitMatrix {
        assert_eq!(self.dim(), rhs.dim());
        // Row i of the product is the XOR of rhs rows selected by row i of self.
        let rows = self
            .rows
            .iter()
            .map(|&r| {
                let mut acc = 0u128;
                let mut bits = r;
                while bits != 0 {
                    let j = bits.trailing_zeros() as usize;
                    acc ^= rhs.rows[j];
                    bits &= bits - 1;
                }
                acc
            })
            .collect();
        BitMatrix { rows }
    }

    pub fn pow(&self, mut e: u32) -> BitMatrix {
        let mut base = self.clone();
        let mut acc = BitMatrix::identity(self.dim());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn rank(&self) -> usize {
        let mut sys = AffineSystem::new(self.dim());
        for &r in &self.rows {
            sys.push(r, false);
        }
        sys.rank()
    }

    /// Inverse by Gauss-Jordan elimination, `None` if singular.
    pub fn inverse(&self) -> Option<BitMatrix> {
        let n = self.dim();
        let mut a = self.rows.clone();
        let mut inv: Vec<u128> = (0..n).map(|i| 1u128 << i).collect();
        for col in 0..n {
            let pivot = (col..n).find(|&r| (a[r] >> col) & 1 == 1)?;
            a.swap(col, pivot);
            inv.swap(col, pivot);
            for r in 0..n {
                if r != col && (a[r] >> col) & 1 == 1 {
                    a[r] ^= a[col];
                    inv[r] ^= inv[col];
                }
            }
        }
        Some(BitMatrix { rows: inv })
    }
}

/// Equations `dot(coeffs, x) = rhs` over `n` unknowns.
#[derive(Clone, Debug, Default)]
pub struct AffineSystem {
    n: usize,
    equations: Vec<(u128, bool)>,
}

/// Solution set `{particular ^ span(kernel)}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub particular: u128,
    pub kernel: Vec<u128>,
    pub rank: usize,
}

impl AffineSystem {
    pub fn new(n: usize) -> Self {
        assert!(n <= 128);
        AffineSystem {
            n,
            equations: Vec::new(),
        }
    }

    pub fn unknowns(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    pub fn push(&mut self, coeffs: u128, rhs: bool) {
        self.equations.push((coeffs, rhs));
    }

    /// Reduced row echelon form; returns (rows, pivot columns) and whether a
    /// `0 = 1` row appeared.
    fn reduce(&self) -> (Vec<(u128, bool)>, Vec<usize>, bool) {
        let mut rows = self.equations.clone();
        let mut pivots = Vec::new();
        let mut next = 0;
        for col in 0..self.n {
            let Some(p) = (next..rows.len()).find(|&r| (rows[r].0 >> col) & 1 == 1) else {
                continue;
            };
            rows.swap(next, p);
            let (pc, pr) = rows[next];
            for (r, row) in rows.iter_mut().enumerate() {
                if r != next && (row.0 >> col) & 1 == 1 {
                    row.0 ^= pc;
                    row.1 ^= pr;
                }
            }
            pivots.push(col);
            next += 1;
        }
        let inconsistent = rows[next..].iter().any(|&(c, r)| c == 0 && r);
        rows.truncate(next);
        (rows, pivots, inconsistent)
    }

    pub fn rank(&self) -> usize {
        self.reduce().1.len()
    }

    /// `None` when the system is inconsistent.
    pub fn solve(&self) -> Option<Solution> {
        let (rows, pivots, inconsistent) = self.reduce();
        if inconsistent {
            return None;
        }
        let mut particular = 0u128;
        for (&(_, rhs), &col) in rows.iter().zip(&pivots) {
            if rhs {
                particular |= 1u128 << col;
            }
        }
        let pivot_mask = pivots.iter().fold(0u128, |m, &c| m | (1u128 << c));
        let kernel = (0..self.n)
            .filter(|&c| (pivot_mask >> c) & 1 == 0)
            .map(|free| {
                let mut v = 1u128 << free;
                for (&(coeffs, _), &col) in rows.iter().zip(&pivots) {
                    if (coeffs >> free) & 1 == 1 {
                        v |= 1u128 << col;
                    }
                }
                v
            })
            .collect();
        Some(Solution {
            particular,
            kernel,
            rank: pivots.len(),
        })
    }
}
