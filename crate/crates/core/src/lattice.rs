//! Rectangular qubit grids and their brickwork edge layers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest lattice accepted by [`LatticeSpec::new`]. Gate programs and
/// compilation counts work at this size; state simulation has its own caps.
pub const DEFAULT_MAX_QUBITS: usize = 144;

/// The four brickwork layers, listed in the order they act within one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeLayer {
    HorizontalOdd,
    HorizontalEven,
    VerticalOdd,
    VerticalEven,
}

impl EdgeLayer {
    pub const ALL: [EdgeLayer; 4] = [
        EdgeLayer::HorizontalOdd,
        EdgeLayer::HorizontalEven,
        EdgeLayer::VerticalOdd,
        EdgeLayer::VerticalEven,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// An edge between two lattice-adjacent qubits; `i` is the left (or upper) site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
}

/// Rectangular grid of `lx` columns by `ly` rows, qubit `x + lx*y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LatticeDims", into = "LatticeDims")]
pub struct LatticeSpec {
    lx: usize,
    ly: usize,
    layers: [Vec<Edge>; 4],
}

#[derive(Serialize, Deserialize)]
struct LatticeDims {
    lx: usize,
    ly: usize,
}

impl TryFrom<LatticeDims> for LatticeSpec {
    type Error = Error;
    fn try_from(d: LatticeDims) -> Result<Self> {
        LatticeSpec::new(d.lx, d.ly)
    }
}

impl From<LatticeSpec> for LatticeDims {
    fn from(l: LatticeSpec) -> Self {
        LatticeDims { lx: l.lx, ly: l.ly }
    }
}

impl LatticeSpec {
    pub fn new(lx: usize, ly: usize) -> Result<Self> {
        Self::with_budget(lx, ly, DEFAULT_MAX_QUBITS)
    }

    pub fn with_budget(lx: usize, ly: usize, max_qubits: usize) -> Result<Self> {
        if lx == 0 || ly == 0 {
            return Err(Error::param(format!("lattice dimensions must be positive, got {lx}x{ly}")));
        }
        let n = lx.checked_mul(ly).ok_or_else(|| Error::param("lattice size overflows"))?;
        if n > max_qubits {
            return Err(Error::resource("lattice qubits", n as u64, max_qubits as u64));
        }
        let q = |x: usize, y: usize| x + lx * y;
        let mut layers: [Vec<Edge>; 4] = Default::default();
        // row-major within each layer
        for y in 0..ly {
            for x in 0..lx {
                if x + 1 < lx {
                    let layer = if x % 2 == 0 { EdgeLayer::HorizontalOdd } else { EdgeLayer::HorizontalEven };
                    layers[layer.index()].push(Edge { i: q(x, y), j: q(x + 1, y) });
                }
                if y + 1 < ly {
                    let layer = if y % 2 == 0 { EdgeLayer::VerticalOdd } else { EdgeLayer::VerticalEven };
                    layers[layer.index()].push(Edge { i: q(x, y), j: q(x, y + 1) });
                }
            }
        }
        Ok(LatticeSpec { lx, ly, layers })
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    /// Qubit count.
    pub fn n(&self) -> usize {
        self.lx * self.ly
    }

    pub fn qubit(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.lx && y < self.ly);
        x + self.lx * y
    }

    pub fn coords(&self, q: usize) -> (usize, usize) {
        (q % self.lx, q / self.lx)
    }

    /// Closed-form edge count `lx(ly-1) + ly(lx-1)`.
    pub fn edge_count(&self) -> usize {
        self.lx * (self.ly - 1) + self.ly * (self.lx - 1)
    }

    pub fn layer(&self, layer: EdgeLayer) -> &[Edge] {
        &self.layers[layer.index()]
    }

    /// All edges, layer by layer in temporal order.
    pub fn edges(&self) -> impl Iterator<Item = (EdgeLayer, &Edge)> {
        EdgeLayer::ALL
            .into_iter()
            .flat_map(move |l| self.layers[l.index()].iter().map(move |e| (l, e)))
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        let (xa, ya) = self.coords(a);
        let (xb, yb) = self.coords(b);
        xa.abs_diff(xb) + ya.abs_diff(yb) == 1
    }

    pub fn label(&self) -> String {
        format!("{}x{}", self.lx, self.ly)
    }
}
