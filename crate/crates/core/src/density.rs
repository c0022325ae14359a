//! Reduced density matrices of pure states.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::bit_of;
use crate::error::{Error, Result};
use crate::samples::Patch;
use crate::state::PureState;

/// Largest patch for which a dense `ρ_A` is built.
pub const MAX_DENSITY_QUBITS: usize = 12;

/// `ρ_A` on an ordered patch; row index bits follow patch order, first
/// patch qubit most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity {
    patch: Vec<usize>,
    matrix: DMatrix<Complex64>,
}

impl ReducedDensity {
    pub fn new(patch: Vec<usize>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = 1usize.checked_shl(patch.len() as u32).unwrap_or(0);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::param(format!("density for {} qubits must be {d}x{d}", patch.len())));
        }
        Ok(ReducedDensity { patch, matrix })
    }

    pub fn maximally_mixed(n_a: usize) -> Self {
        let d = 1 << n_a;
        let matrix = DMatrix::from_diagonal_element(d, d, Complex64::new(1.0 / d as f64, 0.0));
        ReducedDensity { patch: (0..n_a).collect(), matrix }
    }

    /// `|ψ⟩⟨ψ|` for a vector on the patch.
    pub fn pure(amps: &[Complex64]) -> Result<Self> {
        let n_a = amps.len().trailing_zeros() as usize;
        if !amps.len().is_power_of_two() {
            return Err(Error::param("pure-state length must be a power of two"));
        }
        let v = nalgebra::DVector::from_column_slice(amps);
        Self::new((0..n_a).collect(), &v * v.adjoint())
    }

    pub fn patch(&self) -> &[usize] {
        &self.patch
    }

    pub fn n_a(&self) -> usize {
        self.patch.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `Tr ρ²`, computed as the squared Frobenius norm.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Diagonal of `ρ_A`: the Z-basis marginal distribution.
    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    /// `ρ_A` with all off-diagonal coherences removed.
    pub fn dephased(&self) -> Self {
        let d = self.dim();
        let diag = nalgebra::DVector::from_iterator(d, self.matrix.diagonal().iter().copied());
        ReducedDensity { patch: self.patch.clone(), matrix: DMatrix::from_diagonal(&diag) }
    }

    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.matrix;
        (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Partial trace of a pure state over the complement of `patch`.
pub fn reduced_density(state: &dyn PureState, patch: &Patch) -> Result<ReducedDensity> {
    let n = state.n();
    let n_a = patch.len();
    if n_a > MAX_DENSITY_QUBITS {
        return Err(Error::resource("density-matrix patch qubits", n_a as u64, MAX_DENSITY_QUBITS as u64));
    }
    patch.check_width(n)?;
    let patch_mask: u64 = patch.qubits().iter().fold(0, |m, &q| m | crate::basis::qubit_mask(n, q));
    let mut groups: HashMap<u64, Vec<(usize, Complex64)>> = HashMap::new();
    state.for_each_amplitude(&mut |s, a| {
        if a == Complex64::new(0.0, 0.0) {
            return;
        }
        let idx = patch.qubits().iter().fold(0usize, |acc, &q| (acc << 1) | bit_of(s, n, q) as usize);
        groups.entry(s & !patch_mask).or_default().push((idx, a));
    });
    let d = 1usize << n_a;
    let mut rho = DMatrix::<Complex64>::zeros(d, d);
    for entries in groups.values() {
        for &(r, ar) in entries {
            for &(c, ac) in entries {
                rho[(r, c)] += ar * ac.conj();
            }
        }
    }
    ReducedDensity::new(patch.qubits().to_vec(), rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::SectorBasis;
    use crate::state::{FullState, SectorState};
    use std::sync::Arc;

    /// Dense partial trace written against the full vector with explicit index arithmetic.
    fn dense_partial_trace(full: &FullState, patch: &[usize]) -> DMatrix<Complex64> {
        let n = PureState::n(full);
        let rest: Vec<usize> = (0..n).filter(|q| !patch.contains(q)).collect();
        let d_a = 1 << patch.len();
        let d_b = 1 << rest.len();
        let index = |a: usize, b: usize| -> usize {
            let mut s = 0usize;
            for (t, &q) in patch.iter().enumerate() {
                if a >> (patch.len() - 1 - t) & 1 == 1 {
                    s |= 1 << (n - 1 - q);
                }
            }
            for (t, &q) in rest.iter().enumerate() {
                if b >> (rest.len() - 1 - t) & 1 == 1 {
                    s |= 1 << (n - 1 - q);
                }
            }
            s
        };
        let psi = full.amplitudes();
        DMatrix::from_fn(d_a, d_a, |r, c| (0..d_b).map(|b| psi[index(r, b)] * psi[index(c, b)].conj()).sum())
    }

    #[test]
    fn product_state_gives_projector() {
        let s = FullState::basis_state(5, 0b10110).unwrap();
        let patch = Patch::from_qubits(vec![4, 0, 2], 5).unwrap();
        let rho = reduced_density(&s, &patch).unwrap();
        // bits: q4=0, q0=1, q2=1 → 0b011
        assert_eq!(rho.matrix()[(3, 3)], Complex64::new(1.0, 0.0));
        assert!((rho.purity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_dense_oracle() {
        let basis = Arc::new(SectorBasis::new(8, 4, 100).unwrap());
        let s = SectorState::haar_random(basis, 11);
        let full = s.to_full().unwrap();
        for patch in [vec![0, 1, 2], vec![7, 3, 5], vec![6]] {
            let p = Patch::from_qubits(patch.clone(), 8).unwrap();
            let rho = reduced_density(&s, &p).unwrap();
            let oracle = dense_partial_trace(&full, &patch);
            let diff = (rho.matrix() - &oracle).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12);
            let oracle_purity = (&oracle * &oracle).trace().re;
            assert!((rho.purity() - oracle_purity).abs() < 1e-10);
            assert!((rho.trace() - 1.0).abs() < 1e-10);
            assert!(rho.hermiticity_error() < 1e-12);
            assert!(rho.min_eigenvalue() > -1e-8);
        }
    }

    #[test]
    fn rejects_oversized_patch() {
        let s = FullState::basis_state(14, 0).unwrap();
        let p = Patch::from_qubits((0..13).collect(), 14).unwrap();
        assert!(matches!(reduced_density(&s, &p), Err(Error::Resource { .. })));
    }

    #[test]
    fn maximally_mixed_and_pure_helpers() {
        let m = ReducedDensity::maximally_mixed(3);
        assert!((m.purity() - 0.125).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = ReducedDensity::pure(&[Complex64::new(h, 0.0), Complex64::new(h, 0.0)]).unwrap();
        assert!((plus.purity() - 1.0).abs() < 1e-12);
        assert!((plus.dephased().purity() - 0.5).abs() < 1e-12);
    }
}
