//! Exact diagonalization of one Floquet cycle inside a weight sector.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::SectorBasis;
use crate::circuit::FloquetCircuit;
use crate::error::{Error, Result};
use crate::state::SectorState;

/// Default largest sector dimension for dense diagonalization.
pub const DEFAULT_MAX_SPECTRUM_DIM: usize = 4096;

/// Sorted quasienergies `θ ∈ [0, 2π)` of `U_F` on one sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenphaseSet {
    pub n: usize,
    pub weight: usize,
    pub phases: Vec<f64>,
    /// `max |U†U − 1|` of the matrix that was diagonalized.
    pub unitarity_residual: f64,
}

impl EigenphaseSet {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn sector_label(&self) -> String {
        format!("n={} m={}", self.n, self.weight)
    }
}

/// Single-cycle unitary on the weight-`m` sector, built column by column.
pub fn floquet_unitary(circuit: &FloquetCircuit, m: usize, max_dim: usize) -> Result<DMatrix<Complex64>> {
    let n = circuit.lattice().n();
    if m > n {
        return Err(Error::param(format!("weight {m} exceeds {n} qubits")));
    }
    let basis = Arc::new(SectorBasis::new(n, m, max_dim)?);
    let dim = basis.dim();
    let columns: Vec<Vec<Complex64>> = (0..dim)
        .into_par_iter()
        .map(|r| {
            let mut s = SectorState::basis_state(basis.clone(), basis.state(r)).expect("state from its own basis");
            s.apply_cycle(circuit);
            s.amplitudes().to_vec()
        })
        .collect();
    Ok(DMatrix::from_fn(dim, dim, |r, c| columns[c][r]))
}

pub fn floquet_eigenphases(circuit: &FloquetCircuit, m: usize) -> Result<EigenphaseSet> {
    floquet_eigenphases_with_cap(circuit, m, DEFAULT_MAX_SPECTRUM_DIM)
}

pub fn floquet_eigenphases_with_cap(circuit: &FloquetCircuit, m: usize, max_dim: usize) -> Result<EigenphaseSet> {
    let u = floquet_unitary(circuit, m, max_dim)?;
    let mut set = unitary_eigenphases(u)?;
    set.n = circuit.lattice().n();
    set.weight = m;
    Ok(set)
}

/// Eigenphases of a dense unitary, via the general complex Schur solver.
pub fn unitary_eigenphases(u: DMatrix<Complex64>) -> Result<EigenphaseSet> {
    if !u.is_square() {
        return Err(Error::param("unitary must be square"));
    }
    let d = u.nrows();
    let residual = (u.adjoint() * &u - DMatrix::<Complex64>::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if residual > 1e-8 {
        return Err(Error::param(format!("matrix is not unitary (residual {residual:.3e})")));
    }
    let eig = u
        .eigenvalues()
        .ok_or_else(|| Error::param("eigenvalue iteration did not converge"))?;
    let mut phases: Vec<f64> = eig.iter().map(|z| z.arg().rem_euclid(TAU)).map(|p| if p >= TAU { 0.0 } else { p }).collect();
    phases.sort_by(f64::total_cmp);
    Ok(EigenphaseSet { n: 0, weight: 0, phases, unitarity_residual: residual })
}
