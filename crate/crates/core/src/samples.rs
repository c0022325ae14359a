//! Measured bitstrings and lattice patches.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::rng::{self, Domain};

/// Widest bitstring a [`SampleSet`] can hold.
pub const MAX_SAMPLE_QUBITS: usize = 128;

/// Qubit-order tag written into counts files: row-major, qubit 0 leftmost.
pub const ORDER_TAG: &str = "row-major-q0-left";

/// A multiset of measured `n`-bit strings.
///
/// Shots are kept in acquisition order so that contiguous batches reflect
/// drift in the source. Strings are encoded with qubit 0 as the most
/// significant of the low `n` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    n: usize,
    shots: Vec<u128>,
}

impl SampleSet {
    pub fn from_shots(n: usize, shots: Vec<u128>) -> Result<Self> {
        if n == 0 || n > MAX_SAMPLE_QUBITS {
            return Err(Error::param(format!("sample width must be in 1..={MAX_SAMPLE_QUBITS}, got {n}")));
        }
        if shots.is_empty() {
            return Err(Error::param("a sample set needs at least one shot"));
        }
        if n < 128 {
            if let Some(bad) = shots.iter().find(|&&s| s >> n != 0) {
                return Err(Error::param(format!("shot {bad:#x} wider than {n} bits")));
            }
        }
        Ok(SampleSet { n, shots })
    }

    /// Expands a counts table into shots.
    ///
    /// Counts carry no order, so the expanded shots are shuffled with a fixed
    /// stream; batches then sample the table uniformly.
    pub fn from_counts(n: usize, counts: &BTreeMap<u128, u64>) -> Result<Self> {
        let total: u64 = counts.values().sum();
        let mut shots = Vec::with_capacity(total as usize);
        for (&s, &c) in counts {
            shots.extend(std::iter::repeat_n(s, c as usize));
        }
        shots.shuffle(&mut rng::stream(0, Domain::Subsample, u64::MAX, 0));
        Self::from_shots(n, shots)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn shots(&self) -> &[u128] {
        &self.shots
    }

    pub fn counts(&self) -> BTreeMap<u128, u64> {
        let mut map = BTreeMap::new();
        for &s in &self.shots {
            *map.entry(s).or_insert(0) += 1;
        }
        map
    }

    /// Number of shots at each Hamming weight `0..=n`.
    pub fn weight_histogram(&self) -> Vec<u64> {
        let mut h = vec![0u64; self.n + 1];
        for s in &self.shots {
            h[s.count_ones() as usize] += 1;
        }
        h
    }

    /// Substrings on `patch`, first patch qubit most significant.
    pub fn restrict(&self, patch: &Patch) -> Result<SampleSet> {
        patch.check_width(self.n)?;
        let n = self.n;
        let shots = self
            .shots
            .iter()
            .map(|&s| patch.qubits().iter().fold(0u128, |acc, &q| (acc << 1) | ((s >> (n - 1 - q)) & 1)))
            .collect();
        SampleSet::from_shots(patch.len(), shots)
    }

    /// `k` shots drawn without replacement, kept in their original order.
    pub fn subsample(&self, k: usize, seed: u64) -> Result<SampleSet> {
        if k == 0 || k > self.len() {
            return Err(Error::param(format!("cannot take {k} of {} shots", self.len())));
        }
        let mut rng = rng::stream(seed, Domain::Subsample, 0, 0);
        let mut idx = rand::seq::index::sample(&mut rng, self.len(), k).into_vec();
        idx.sort_unstable();
        SampleSet::from_shots(self.n, idx.into_iter().map(|i| self.shots[i]).collect())
    }
}

/// Rectangle placement of a patch on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatchShape {
    pub w: usize,
    pub h: usize,
}

impl PatchShape {
    pub fn new(w: usize, h: usize) -> Self {
        PatchShape { w, h }
    }

    pub fn label(&self) -> String {
        format!("{}x{}", self.w, self.h)
    }

    pub fn size(&self) -> usize {
        self.w * self.h
    }
}

impl std::str::FromStr for PatchShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| Error::param(format!("patch shape `{s}` is not WxH")))?;
        let parse = |t: &str| {
            t.trim().parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(|| Error::param(format!("bad patch dimension in `{s}`")))
        };
        Ok(PatchShape::new(parse(w)?, parse(h)?))
    }
}

/// An ordered set of qubits, optionally tagged as a lattice rectangle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    qubits: Vec<usize>,
    rect: Option<(PatchShape, usize, usize)>,
}

impl Patch {
    pub fn from_qubits(qubits: Vec<usize>, n: usize) -> Result<Self> {
        if qubits.is_empty() {
            return Err(Error::param("empty patch"));
        }
        let mut seen = vec![false; n];
        for &q in &qubits {
            if q >= n || std::mem::replace(&mut seen[q], true) {
                return Err(Error::param(format!("patch qubit {q} repeated or outside 0..{n}")));
            }
        }
        Ok(Patch { qubits, rect: None })
    }

    /// Rectangle with top-left corner `(x0, y0)`, qubits in row-major order.
    pub fn rect(lattice: &LatticeSpec, shape: PatchShape, x0: usize, y0: usize) -> Result<Self> {
        if shape.w == 0 || shape.h == 0 || x0 + shape.w > lattice.lx() || y0 + shape.h > lattice.ly() {
            return Err(Error::param(format!(
                "patch {} at ({x0},{y0}) does not fit the {} lattice",
                shape.label(),
                lattice.label()
            )));
        }
        let qubits = (y0..y0 + shape.h).flat_map(|y| (x0..x0 + shape.w).map(move |x| lattice.qubit(x, y))).collect();
        Ok(Patch { qubits, rect: Some((shape, x0, y0)) })
    }

    /// Every axis-aligned placement of `shape` inside the lattice, row-major by anchor.
    pub fn translations(lattice: &LatticeSpec, shape: PatchShape) -> Result<Vec<Patch>> {
        if shape.w > lattice.lx() || shape.h > lattice.ly() {
            return Err(Error::param(format!("patch {} larger than lattice {}", shape.label(), lattice.label())));
        }
        let mut out = Vec::new();
        for y0 in 0..=lattice.ly() - shape.h {
            for x0 in 0..=lattice.lx() - shape.w {
                out.push(Patch::rect(lattice, shape, x0, y0)?);
            }
        }
        Ok(out)
    }

    /// `count` translations chosen by seed, in anchor order; all of them if fewer exist.
    pub fn sampled_translations(lattice: &LatticeSpec, shape: PatchShape, count: usize, seed: u64) -> Result<Vec<Patch>> {
        let all = Self::translations(lattice, shape)?;
        if count >= all.len() {
            return Ok(all);
        }
        let mut rng = rng::stream(seed, Domain::Subsample, 1, 0);
        let mut idx = rand::seq::index::sample(&mut rng, all.len(), count).into_vec();
        idx.sort_unstable();
        Ok(idx.into_iter().map(|i| all[i].clone()).collect())
    }

    /// The placement closest to the lattice centre (ties toward the origin).
    pub fn central(lattice: &LatticeSpec, shape: PatchShape) -> Result<Self> {
        if shape.w > lattice.lx() || shape.h > lattice.ly() {
            return Err(Error::param(format!("patch {} larger than lattice {}", shape.label(), lattice.label())));
        }
        Patch::rect(lattice, shape, (lattice.lx() - shape.w) / 2, (lattice.ly() - shape.h) / 2)
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn shape(&self) -> Option<PatchShape> {
        self.rect.map(|r| r.0)
    }

    pub fn anchor(&self) -> Option<(usize, usize)> {
        self.rect.map(|r| (r.1, r.2))
    }

    pub fn label(&self) -> String {
        match self.rect {
            Some((s, x, y)) => format!("{}@{x},{y}", s.label()),
            None => format!("{:?}", self.qubits),
        }
    }

    pub(crate) fn check_width(&self, n: usize) -> Result<()> {
        match self.qubits.iter().find(|&&q| q >= n) {
            Some(q) => Err(Error::param(format!("patch qubit {q} outside a {n}-qubit register"))),
            None => Ok(()),
        }
    }
}
