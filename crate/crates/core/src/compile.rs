//! Native-gate accounting: each Heisenberg interaction compiled to three CNOTs
//! (hence three CZs) plus single-qubit rotations.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::FloquetCircuit;
use crate::gate::{heisenberg_matrix, phase_invariant_distance, Mat4, TwoQubitGate};
use crate::lattice::EdgeLayer;

/// Hardware-level gate. Rotations follow `R_P(θ) = exp(-iθP/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NativeGate {
    Rz { q: usize, angle: f64 },
    Ry { q: usize, angle: f64 },
    H { q: usize },
    Cz { a: usize, b: usize },
}

impl NativeGate {
    pub fn is_two_qubit(&self) -> bool {
        matches!(self, NativeGate::Cz { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileStats {
    pub cz_count: usize,
    pub cz_depth: usize,
    pub one_qubit_count: usize,
}

/// Closed-form counts: `3·n_F·E` CZs at depth `12·n_F`.
pub fn closed_form_stats(circuit: &FloquetCircuit) -> (usize, usize) {
    let n_f = circuit.n_f();
    (3 * n_f * circuit.lattice().edge_count(), 12 * n_f)
}

fn push_cnot(out: &mut Vec<NativeGate>, control: usize, target: usize) {
    out.push(NativeGate::H { q: target });
    out.push(NativeGate::Cz { a: control, b: target });
    out.push(NativeGate::H { q: target });
}

/// Three-CNOT circuit for `exp(iJ(XX+YY+ZZ))` on qubits `(i, j)`, correct up
/// to a global phase, with `θ = λ = π/2 − 2J` and `φ = 2J − π/2`.
pub fn decompose_heisenberg(i: usize, j: usize, coupling: f64) -> Vec<NativeGate> {
    let theta = FRAC_PI_2 - 2.0 * coupling;
    let lambda = theta;
    let phi = 2.0 * coupling - FRAC_PI_2;
    let mut out = Vec::with_capacity(14);
    out.push(NativeGate::Rz { q: j, angle: -FRAC_PI_2 });
    push_cnot(&mut out, j, i);
    out.push(NativeGate::Rz { q: i, angle: theta });
    out.push(NativeGate::Ry { q: j, angle: phi });
    push_cnot(&mut out, i, j);
    out.push(NativeGate::Ry { q: j, angle: lambda });
    push_cnot(&mut out, j, i);
    out.push(NativeGate::Rz { q: i, angle: FRAC_PI_2 });
    out
}

/// Native sequence for one disordered gate: the field rotations act first.
pub fn decompose_gate(g: &TwoQubitGate) -> Vec<NativeGate> {
    let mut out = vec![
        NativeGate::Rz { q: g.i, angle: -2.0 * g.h_i },
        NativeGate::Rz { q: g.j, angle: -2.0 * g.h_j },
    ];
    out.extend(decompose_heisenberg(g.i, g.j, g.coupling));
    out
}

/// The full decomposed program: cycles → layers → per-gate native sequences.
pub fn decompose_circuit(circuit: &FloquetCircuit) -> Vec<Vec<Vec<NativeGate>>> {
    let mut layers = Vec::with_capacity(4 * circuit.n_f());
    for _ in 0..circuit.n_f() {
        for layer in EdgeLayer::ALL {
            layers.push(circuit.layer(layer).iter().map(decompose_gate).collect());
        }
    }
    layers
}

/// Counts taken from the literal decomposed program. Gates within a layer act
/// on disjoint pairs and run in parallel, so a layer contributes the largest
/// per-gate CZ count to the depth.
pub fn compile_stats(circuit: &FloquetCircuit) -> CompileStats {
    let mut stats = CompileStats { cz_count: 0, cz_depth: 0, one_qubit_count: 0 };
    for layer in decompose_circuit(circuit) {
        let mut layer_depth = 0;
        for seq in &layer {
            let cz = seq.iter().filter(|g| g.is_two_qubit()).count();
            stats.cz_count += cz;
            stats.one_qubit_count += seq.len() - cz;
            layer_depth = layer_depth.max(cz);
        }
        stats.cz_depth += layer_depth;
    }
    stats
}

/// Dense 4×4 product of a native sequence acting on the pair `(i, j)`, basis
/// `|q_i q_j⟩` with `q_i` most significant.
pub fn sequence_matrix(seq: &[NativeGate], i: usize, j: usize) -> Mat4 {
    let mut acc = Mat4::identity();
    for g in seq {
        acc = native_matrix(g, i, j) * acc;
    }
    acc
}

fn native_matrix(g: &NativeGate, i: usize, j: usize) -> Mat4 {
    let zero = Complex64::new(0.0, 0.0);
    let one_qubit = |q: usize, m: [[Complex64; 2]; 2]| -> Mat4 {
        assert!(q == i || q == j, "native gate outside the pair");
        let left = q == i;
        Mat4::from_fn(|r, c| {
            let (ri, rj, ci, cj) = (r >> 1, r & 1, c >> 1, c & 1);
            if left {
                if rj != cj { zero } else { m[ri][ci] }
            } else if ri != ci {
                zero
            } else {
                m[rj][cj]
            }
        })
    };
    match *g {
        NativeGate::Rz { q, angle } => {
            let a = Complex64::from_polar(1.0, -angle / 2.0);
            one_qubit(q, [[a, zero], [zero, a.conj()]])
        }
        NativeGate::Ry { q, angle } => {
            let (s, c) = (angle / 2.0).sin_cos();
            let (s, c) = (Complex64::new(s, 0.0), Complex64::new(c, 0.0));
            one_qubit(q, [[c, -s], [s, c]])
        }
        NativeGate::H { q } => {
            let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            one_qubit(q, [[h, h], [h, -h]])
        }
        NativeGate::Cz { a, b } => {
            assert!((a == i && b == j) || (a == j && b == i));
            let mut m = Mat4::identity();
            m[(3, 3)] = Complex64::new(-1.0, 0.0);
            m
        }
    }
}

/// Global-phase-invariant distance between the three-CNOT circuit and
/// `exp(iJ(XX+YY+ZZ))`.
pub fn verify_native_decomposition(coupling: f64) -> f64 {
    let seq = decompose_heisenberg(0, 1, coupling);
    phase_invariant_distance(&sequence_matrix(&seq, 0, 1), &heisenberg_matrix(coupling))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn decomposition_matches_exponential() {
        for j in [0.0, FRAC_PI_4, 0.1 * PI] {
            assert!(verify_native_decomposition(j) < 1e-10, "J={j}");
        }
        for k in 0..=100 {
            let j = FRAC_PI_4 * k as f64 / 100.0;
            assert!(verify_native_decomposition(j) < 1e-10, "J={j}");
        }
    }

    #[test]
    fn disordered_gate_decomposition() {
        let g = TwoQubitGate::new(3, 7, 0.37, -0.8, 1.3).unwrap();
        let m = sequence_matrix(&decompose_gate(&g), 3, 7);
        assert!(phase_invariant_distance(&m, &g.matrix()) < 1e-10);
    }

    #[test]
    fn table_values() {
        for (l, n_f, cz, depth) in [(4, 2, 144, 24), (5, 3, 360, 36), (6, 3, 540, 36), (8, 4, 1344, 48), (9, 5, 2160, 60), (10, 5, 2700, 60)] {
            let lat = LatticeSpec::new(l, l).unwrap();
            let c = FloquetCircuit::build(&lat, 0.2, n_f, 1).unwrap();
            let s = compile_stats(&c);
            assert_eq!((s.cz_count, s.cz_depth), (cz, depth), "{l}x{l}");
        }
    }

    #[test]
    fn literal_count_matches_closed_form() {
        for lx in 3..=6 {
            for ly in 3..=6 {
                let lat = LatticeSpec::new(lx, ly).unwrap();
                for n_f in 1..=5 {
                    let c = FloquetCircuit::build(&lat, 0.1, n_f, 3).unwrap();
                    let s = compile_stats(&c);
                    assert_eq!((s.cz_count, s.cz_depth), closed_form_stats(&c));
                    assert_eq!(s.one_qubit_count, 13 * lat.edge_count() * n_f);
                }
            }
        }
    }

    #[test]
    fn thin_lattices_have_empty_layers() {
        // a 2-wide strip has no even horizontal edges, so each cycle is 9 deep
        let lat = LatticeSpec::new(2, 4).unwrap();
        let c = FloquetCircuit::build(&lat, 0.1, 2, 3).unwrap();
        let s = compile_stats(&c);
        assert_eq!(s.cz_count, closed_form_stats(&c).0);
        assert_eq!(s.cz_depth, 18);
    }

    #[test]
    fn count_independent_of_coupling() {
        let lat = LatticeSpec::new(4, 5).unwrap();
        let a = compile_stats(&FloquetCircuit::build(&lat, 0.0, 2, 1).unwrap());
        let b = compile_stats(&FloquetCircuit::build(&lat, 0.7, 2, 1).unwrap());
        assert_eq!(a, b);
    }
}
