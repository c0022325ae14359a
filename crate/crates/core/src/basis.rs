//! Fixed-Hamming-weight basis enumeration.
//!
//! A computational basis string of `n` qubits is stored as a `u64` with qubit 0
//! in the most significant of the low `n` bits, so integer order coincides
//! with lexicographic order of the written string (qubit 0 leftmost).
//! Weight-`m` strings are ranked with the combinatorial number system, which
//! enumerates them in increasing integer order.

use crate::error::{Error, Result};

/// Largest qubit count representable by the `u64` basis encoding.
pub const MAX_STATE_QUBITS: usize = 63;

#[inline]
pub fn bit_of(state: u64, n: usize, q: usize) -> u64 {
    (state >> (n - 1 - q)) & 1
}

#[inline]
pub fn qubit_mask(n: usize, q: usize) -> u64 {
    1u64 << (n - 1 - q)
}

/// Renders `state` as an `n`-character string, qubit 0 first.
pub fn format_bits(state: u128, n: usize) -> String {
    (0..n).map(|q| if (state >> (n - 1 - q)) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Table of binomial coefficients `C(a, b)` for `a ≤ n`.
#[derive(Debug, Clone)]
pub struct Binomials {
    rows: Vec<Vec<u64>>,
}

impl Binomials {
    pub fn new(n: usize) -> Self {
        let mut rows: Vec<Vec<u64>> = Vec::with_capacity(n + 1);
        for a in 0..=n {
            let mut row = vec![1u64; a + 1];
            for b in 1..a {
                row[b] = rows[a - 1][b - 1] + rows[a - 1][b];
            }
            rows.push(row);
        }
        Binomials { rows }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> u64 {
        if b > a { 0 } else { self.rows[a][b] }
    }
}

/// `C(n, k)` in `u128` (exact for the sizes used here).
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc * u128::from(n - t) / u128::from(t + 1);
    }
    acc
}

/// Lexicographically ordered basis of the weight-`m` sector of `n` qubits.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    n: usize,
    m: usize,
    binom: Binomials,
    states: Vec<u64>,
}

impl SectorBasis {
    pub fn new(n: usize, m: usize, max_dim: usize) -> Result<Self> {
        if n == 0 || n > MAX_STATE_QUBITS {
            return Err(Error::resource("state qubits", n as u64, MAX_STATE_QUBITS as u64));
        }
        if m > n {
            return Err(Error::param(format!("Hamming weight {m} exceeds qubit count {n}")));
        }
        let dim = binomial(n as u64, m as u64);
        if dim > max_dim as u128 {
            return Err(Error::resource("sector dimension", dim, max_dim as u64));
        }
        let binom = Binomials::new(n);
        let states = SectorIter::new(n, m).collect();
        Ok(SectorBasis { n, m, binom, states })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    #[inline]
    pub fn state(&self, r: usize) -> u64 {
        self.states[r]
    }

    /// Index of a weight-`m` string in the basis.
    #[inline]
    pub fn rank(&self, state: u64) -> usize {
        debug_assert_eq!(state.count_ones() as usize, self.m);
        let mut s = state;
        let mut r = 0u64;
        let mut t = 1;
        while s != 0 {
            let pos = s.trailing_zeros() as usize;
            r += self.binom.get(pos, t);
            t += 1;
            s &= s - 1;
        }
        r as usize
    }

    pub fn unrank(&self, r: usize) -> u64 {
        unrank_with(&self.binom, r as u64, self.m)
    }
}

/// Weight-`m` strings of `n` bits in increasing order (Gosper's hack).
pub struct SectorIter {
    next: Option<u64>,
    limit: u64,
}

impl SectorIter {
    pub fn new(n: usize, m: usize) -> Self {
        let first = if m == 0 { 0 } else { (1u64 << m) - 1 };
        SectorIter { next: Some(first), limit: 1u64 << n }
    }
}

impl Iterator for SectorIter {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let cur = self.next?;
        self.next = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            let nxt = (((r ^ cur) >> 2) / c) | r;
            (nxt < self.limit && r != 0).then_some(nxt)
        };
        Some(cur)
    }
}

fn unrank_with(binom: &Binomials, mut r: u64, m: usize) -> u64 {
    let mut state = 0u64;
    for t in (1..=m).rev() {
        // largest position p with C(p, t) <= r
        let mut p = t - 1;
        while binom.get(p + 1, t) <= r {
            p += 1;
        }
        r -= binom.get(p, t);
        state |= 1 << p;
    }
    state
}
