//! Exact pure-state evolution.
//!
//! [`SectorState`] stores amplitudes only on the fixed-Hamming-weight sector,
//! which the Heisenberg gates and Z rotations preserve. [`FullState`] is the
//! plain `2^n` vector, kept for validation and for inputs outside a sector.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::basis::{bit_of, qubit_mask, SectorBasis, MAX_STATE_QUBITS};
use crate::circuit::FloquetCircuit;
use crate::error::{Error, Result};
use crate::gate::{GateKernel, Mat4, TwoQubitGate};
use crate::lattice::LatticeSpec;
use crate::rng::{self, Domain};
use crate::samples::SampleSet;

/// Default cap on stored amplitudes (`C(25,12)` fits comfortably).
pub const DEFAULT_MAX_AMPLITUDES: usize = 1 << 26;

const PAR_THRESHOLD: usize = 1 << 14;

/// Read access shared by sector and full-space states.
pub trait PureState {
    fn n(&self) -> usize;

    /// Visits every stored `(basis string, amplitude)` pair.
    fn for_each_amplitude(&self, f: &mut dyn FnMut(u64, Complex64));

    fn norm_sqr(&self) -> f64 {
        let mut acc = 0.0;
        self.for_each_amplitude(&mut |_, a| acc += a.norm_sqr());
        acc
    }
}

/// Amplitudes on the weight-`m` sector, in the lexicographic basis order.
#[derive(Debug, Clone)]
pub struct SectorState {
    basis: Arc<SectorBasis>,
    amps: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SectorState {
    pub fn basis_state(basis: Arc<SectorBasis>, state: u64) -> Result<Self> {
        if state.count_ones() as usize != basis.weight() || state >> basis.n() != 0 {
            return Err(Error::param("basis string outside the sector"));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amps[basis.rank(state)] = Complex64::new(1.0, 0.0);
        Ok(SectorState { basis, amps, scratch: Vec::new() })
    }

    pub fn from_amplitudes(basis: Arc<SectorBasis>, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::param(format!("expected {} amplitudes, got {}", basis.dim(), amps.len())));
        }
        Ok(SectorState { basis, amps, scratch: Vec::new() })
    }

    /// Normalized complex-Gaussian vector: a Haar-random state of the sector.
    pub fn haar_random(basis: Arc<SectorBasis>, seed: u64) -> Self {
        let mut rng = rng::stream(seed, Domain::MonteCarlo, 0, 0);
        let mut amps: Vec<Complex64> = (0..basis.dim())
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        SectorState { basis, amps, scratch: Vec::new() }
    }

    /// Checkerboard state: qubit `(x, y)` is 1 where `x + y` is odd.
    pub fn neel(lattice: &LatticeSpec) -> Result<Self> {
        Self::neel_with_cap(lattice, DEFAULT_MAX_AMPLITUDES)
    }

    pub fn neel_with_cap(lattice: &LatticeSpec, max_dim: usize) -> Result<Self> {
        let n = lattice.n();
        let bits = neel_bits(lattice)?;
        let basis = SectorBasis::new(n, bits.count_ones() as usize, max_dim)?;
        Self::basis_state(Arc::new(basis), bits)
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn weight(&self) -> usize {
        self.basis.weight()
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn apply_gate(&mut self, gate: &TwoQubitGate) {
        self.apply_kernel(gate.i, gate.j, &gate.kernel());
    }

    pub fn apply_gate_inverse(&mut self, gate: &TwoQubitGate) {
        self.apply_kernel(gate.i, gate.j, &gate.inverse_kernel());
    }

    /// Applies a number-conserving two-qubit kernel on `(i, j)`.
    pub fn apply_kernel(&mut self, i: usize, j: usize, k: &GateKernel) {
        let n = self.basis.n();
        let (mi, mj) = (qubit_mask(n, i), qubit_mask(n, j));
        let basis = &*self.basis;
        let old = &self.amps;
        let update = |r: usize| -> Complex64 {
            let s = basis.state(r);
            match (s & mi != 0, s & mj != 0) {
                (false, false) => k.d00 * old[r],
                (true, true) => k.d11 * old[r],
                (false, true) => {
                    let p = basis.rank(s ^ mi ^ mj);
                    k.mid[0][0] * old[r] + k.mid[0][1] * old[p]
                }
                (true, false) => {
                    let p = basis.rank(s ^ mi ^ mj);
                    k.mid[1][0] * old[p] + k.mid[1][1] * old[r]
                }
            }
        };
        self.scratch.resize(old.len(), Complex64::new(0.0, 0.0));
        if old.len() >= PAR_THRESHOLD {
            self.scratch.par_iter_mut().enumerate().for_each(|(r, out)| *out = update(r));
        } else {
            self.scratch.iter_mut().enumerate().for_each(|(r, out)| *out = update(r));
        }
        std::mem::swap(&mut self.amps, &mut self.scratch);
    }

    /// One Floquet cycle, layer by layer.
    pub fn apply_cycle(&mut self, circuit: &FloquetCircuit) {
        for g in circuit.cycle() {
            self.apply_gate(g);
        }
    }

    /// All `n_F` cycles of the circuit.
    pub fn evolve(&mut self, circuit: &FloquetCircuit) -> Result<()> {
        if circuit.lattice().n() != self.basis.n() {
            return Err(Error::param(format!(
                "state has {} qubits, circuit has {}",
                self.basis.n(),
                circuit.lattice().n()
            )));
        }
        for _ in 0..circuit.n_f() {
            self.apply_cycle(circuit);
        }
        Ok(())
    }

    /// Born probabilities in basis order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `n_s` independent computational-basis measurements.
    pub fn sample(&self, n_s: usize, seed: u64) -> Result<SampleSet> {
        if n_s == 0 {
            return Err(Error::param("sample count must be at least 1"));
        }
        let mut cdf = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        let mut rng = rng::stream(seed, Domain::Sampling, 0, 0);
        let last = cdf.len() - 1;
        let shots = (0..n_s)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * acc;
                let r = cdf.partition_point(|&c| c <= u).min(last);
                u128::from(self.basis.state(r))
            })
            .collect();
        SampleSet::from_shots(self.basis.n(), shots)
    }

    pub fn to_full(&self) -> Result<FullState> {
        let n = self.basis.n();
        let mut full = FullState::zeros(n)?;
        for (r, a) in self.amps.iter().enumerate() {
            full.amps[self.basis.state(r) as usize] = *a;
        }
        Ok(full)
    }

    /// Binary checkpoint: header then little-endian `(re, im)` pairs.
    pub fn write_checkpoint(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&(self.basis.n() as u32).to_le_bytes())?;
        w.write_all(&(self.basis.weight() as u32).to_le_bytes())?;
        w.write_all(&[BASIS_TAG_SECTOR_LEX])?;
        w.write_all(&(self.amps.len() as u64).to_le_bytes())?;
        for a in &self.amps {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint(r: &mut impl Read, max_dim: usize) -> Result<Self> {
        let bad = |msg: &str| Error::format("<checkpoint>", 0, msg.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("not a state checkpoint"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let m = u32::from_le_bytes(b4) as usize;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        if tag[0] != BASIS_TAG_SECTOR_LEX {
            return Err(bad("unknown basis convention tag"));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let dim = u64::from_le_bytes(b8) as usize;
        let basis = SectorBasis::new(n, m, max_dim)?;
        if basis.dim() != dim {
            return Err(bad("dimension does not match header"));
        }
        let mut amps = Vec::with_capacity(dim);
        for _ in 0..dim {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            amps.push(Complex64::new(re, f64::from_le_bytes(b8)));
        }
        Self::from_amplitudes(Arc::new(basis), amps)
    }
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HFSTATE1";
/// Sector basis, lexicographic, qubit 0 leftmost.
pub const BASIS_TAG_SECTOR_LEX: u8 = 1;

impl PureState for SectorState {
    fn n(&self) -> usize {
        self.basis.n()
    }

    fn for_each_amplitude(&self, f: &mut dyn FnMut(u64, Complex64)) {
        for (r, a) in self.amps.iter().enumerate() {
            f(self.basis.state(r), *a);
        }
    }
}

/// Néel bit pattern of a lattice in the crate's string encoding.
pub fn neel_bits(lattice: &LatticeSpec) -> Result<u64> {
    let n = lattice.n();
    if n > MAX_STATE_QUBITS {
        return Err(Error::resource("state qubits", n as u64, MAX_STATE_QUBITS as u64));
    }
    let mut bits = 0u64;
    for q in 0..n {
        let (x, y) = lattice.coords(q);
        if (x + y) % 2 == 1 {
            bits |= qubit_mask(n, q);
        }
    }
    Ok(bits)
}

/// Dense `2^n` state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    n: usize,
    amps: Vec<Complex64>,
}

/// Full-space vectors are a validation path only.
pub const MAX_FULL_QUBITS: usize = 24;

impl FullState {
    pub fn zeros(n: usize) -> Result<Self> {
        if n > MAX_FULL_QUBITS {
            return Err(Error::resource("full-space qubits", n as u64, MAX_FULL_QUBITS as u64));
        }
        Ok(FullState { n, amps: vec![Complex64::new(0.0, 0.0); 1 << n] })
    }

    pub fn basis_state(n: usize, state: u64) -> Result<Self> {
        let mut s = Self::zeros(n)?;
        s.amps[state as usize] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n > MAX_FULL_QUBITS || amps.len() != 1 << n {
            return Err(Error::param("amplitude count must be 2^n"));
        }
        Ok(FullState { n, amps })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Applies an arbitrary 4×4 operator on `(i, j)`, basis `|q_i q_j⟩`.
    pub fn apply_matrix(&mut self, i: usize, j: usize, m: &Mat4) {
        let n = self.n;
        let (mi, mj) = (qubit_mask(n, i) as usize, qubit_mask(n, j) as usize);
        for base in 0..self.amps.len() {
            if base & (mi | mj) != 0 {
                continue;
            }
            let idx = [base, base | mj, base | mi, base | mi | mj];
            let v = idx.map(|k| self.amps[k]);
            for (r, &k) in idx.iter().enumerate() {
                self.amps[k] = (0..4).map(|c| m[(r, c)] * v[c]).sum();
            }
        }
    }

    pub fn apply_gate(&mut self, gate: &TwoQubitGate) {
        self.apply_matrix(gate.i, gate.j, &gate.matrix());
    }

    pub fn evolve(&mut self, circuit: &FloquetCircuit) {
        for _ in 0..circuit.n_f() {
            for g in circuit.cycle() {
                self.apply_gate(g);
            }
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

impl PureState for FullState {
    fn n(&self) -> usize {
        self.n
    }

    fn for_each_amplitude(&self, f: &mut dyn FnMut(u64, Complex64)) {
        for (s, a) in self.amps.iter().enumerate() {
            f(s as u64, *a);
        }
    }
}

/// Marginal distribution on `patch`; index bits follow patch order, first
/// patch qubit most significant.
pub fn marginal_distribution(state: &dyn PureState, patch: &[usize]) -> Vec<f64> {
    let n = state.n();
    let n_a = patch.len();
    let mut p = vec![0.0; 1 << n_a];
    state.for_each_amplitude(&mut |s, a| {
        let mut idx = 0usize;
        for &q in patch {
            idx = (idx << 1) | bit_of(s, n, q) as usize;
        }
        p[idx] += a.norm_sqr();
    });
    p
}
