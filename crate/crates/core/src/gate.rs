//! The disordered Heisenberg two-qubit gate.
//!
//! Basis order is `|q_i q_j⟩ ∈ {|00⟩, |01⟩, |10⟩, |11⟩}` with qubit `i` as the
//! left (most significant) symbol. `Z|0⟩ = |0⟩`, `Z|1⟩ = -|1⟩`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat4 = Matrix4<Complex64>;

/// One application of `exp(iJ(XX+YY+ZZ)) · exp(i(h_i Z_i + h_j Z_j))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitGate {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
    pub h_i: f64,
    pub h_j: f64,
}

impl TwoQubitGate {
    pub fn new(i: usize, j: usize, coupling: f64, h_i: f64, h_j: f64) -> Result<Self> {
        if i == j {
            return Err(Error::param("gate endpoints must differ"));
        }
        check_coupling(coupling)?;
        for h in [h_i, h_j] {
            if !(-FRAC_PI_2..=FRAC_PI_2).contains(&h) {
                return Err(Error::param(format!("disorder angle {h} outside [-pi/2, pi/2]")));
            }
        }
        Ok(TwoQubitGate { i, j, coupling, h_i, h_j })
    }

    pub fn matrix(&self) -> Mat4 {
        gate_matrix(self.coupling, self.h_i, self.h_j)
    }

    pub fn kernel(&self) -> GateKernel {
        GateKernel::new(self.coupling, self.h_i, self.h_j)
    }

    /// The inverse gate as a kernel (conjugate transpose).
    pub fn inverse_kernel(&self) -> GateKernel {
        self.kernel().adjoint()
    }
}

pub(crate) fn check_coupling(j: f64) -> Result<()> {
    if !(0.0..=FRAC_PI_4).contains(&j) {
        return Err(Error::param(format!("coupling J = {j} outside [0, pi/4]")));
    }
    Ok(())
}

/// The number-conserving structure of the gate: two diagonal phases on
/// `|00⟩`/`|11⟩` and a 2×2 block mixing `|01⟩` and `|10⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateKernel {
    pub d00: Complex64,
    pub d11: Complex64,
    /// Rows/columns ordered `|01⟩, |10⟩`.
    pub mid: [[Complex64; 2]; 2],
}

impl GateKernel {
    pub fn new(coupling: f64, h_i: f64, h_j: f64) -> Self {
        let e = |phi: f64| Complex64::from_polar(1.0, phi);
        let (s, c) = (2.0 * coupling).sin_cos();
        let pre = e(-coupling);
        // Heisenberg block times the Z-field phases on |01⟩ and |10⟩.
        let z01 = e(h_i - h_j);
        let z10 = e(-h_i + h_j);
        let i_s = Complex64::new(0.0, s);
        GateKernel {
            d00: e(coupling + h_i + h_j),
            d11: e(coupling - h_i - h_j),
            mid: [
                [pre * c * z01, pre * i_s * z10],
                [pre * i_s * z01, pre * c * z10],
            ],
        }
    }

    pub fn adjoint(&self) -> Self {
        GateKernel {
            d00: self.d00.conj(),
            d11: self.d11.conj(),
            mid: [
                [self.mid[0][0].conj(), self.mid[1][0].conj()],
                [self.mid[0][1].conj(), self.mid[1][1].conj()],
            ],
        }
    }

    pub fn to_matrix(&self) -> Mat4 {
        let mut m = Mat4::zeros();
        m[(0, 0)] = self.d00;
        m[(3, 3)] = self.d11;
        m[(1, 1)] = self.mid[0][0];
        m[(1, 2)] = self.mid[0][1];
        m[(2, 1)] = self.mid[1][0];
        m[(2, 2)] = self.mid[1][1];
        m
    }
}

/// `exp(iJ(XX+YY+ZZ)) · exp(i(h_i Z_i + h_j Z_j))` as a dense 4×4 matrix.
pub fn gate_matrix(coupling: f64, h_i: f64, h_j: f64) -> Mat4 {
    GateKernel::new(coupling, h_i, h_j).to_matrix()
}

/// `exp(iJ(XX+YY+ZZ))` alone, using `XX+YY+ZZ = 2·SWAP − I`.
pub fn heisenberg_matrix(coupling: f64) -> Mat4 {
    gate_matrix(coupling, 0.0, 0.0)
}

/// Largest entry of `a - e^{iφ} b` over the best global phase `φ`.
pub fn phase_invariant_distance(a: &Mat4, b: &Mat4) -> f64 {
    // align on the overlap Tr(b† a)
    let overlap: Complex64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { Complex64::new(1.0, 0.0) };
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - phase * y).norm())
        .fold(0.0, f64::max)
}
