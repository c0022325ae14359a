//! The disordered Floquet gate program.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::{check_coupling, TwoQubitGate};
use crate::lattice::{EdgeLayer, LatticeSpec};
use crate::rng::{self, Domain};

/// One Floquet cycle materialized gate by gate, repeated `n_f` times.
///
/// Disorder is drawn independently for every gate endpoint within a cycle and
/// is identical across cycles, so the same `U_F` is applied `n_f` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitRecord", into = "CircuitRecord")]
pub struct FloquetCircuit {
    lattice: LatticeSpec,
    coupling: f64,
    n_f: usize,
    seed: u64,
    gates: Vec<TwoQubitGate>,
    /// `gates[offsets[l]..offsets[l+1]]` belong to layer `l`.
    offsets: [usize; 5],
}

/// Disorder angle for one gate endpoint, uniform on `[-π/2, π/2)`.
pub fn disorder_angle(seed: u64, layer: EdgeLayer, edge: usize, endpoint: usize) -> f64 {
    let u = rng::uniform_at(seed, Domain::Disorder, layer.index() as u64, edge as u64, endpoint as u64);
    -PI / 2.0 + PI * u
}

impl FloquetCircuit {
    pub fn build(lattice: &LatticeSpec, coupling: f64, n_f: usize, seed: u64) -> Result<Self> {
        check_coupling(coupling)?;
        if n_f == 0 {
            return Err(Error::param("cycle count n_F must be at least 1"));
        }
        let mut gates = Vec::with_capacity(lattice.edge_count());
        let mut offsets = [0usize; 5];
        for layer in EdgeLayer::ALL {
            for (k, e) in lattice.layer(layer).iter().enumerate() {
                gates.push(TwoQubitGate {
                    i: e.i,
                    j: e.j,
                    coupling,
                    h_i: disorder_angle(seed, layer, k, 0),
                    h_j: disorder_angle(seed, layer, k, 1),
                });
            }
            offsets[layer.index() + 1] = gates.len();
        }
        Ok(FloquetCircuit { lattice: lattice.clone(), coupling, n_f, seed, gates, offsets })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    /// Coupling in radians.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Gates of one cycle in temporal order.
    pub fn cycle(&self) -> &[TwoQubitGate] {
        &self.gates
    }

    pub fn layer(&self, layer: EdgeLayer) -> &[TwoQubitGate] {
        let l = layer.index();
        &self.gates[self.offsets[l]..self.offsets[l + 1]]
    }

    /// Same disorder, different cycle count.
    pub fn with_cycles(&self, n_f: usize) -> Result<Self> {
        if n_f == 0 {
            return Err(Error::param("cycle count n_F must be at least 1"));
        }
        Ok(FloquetCircuit { n_f, ..self.clone() })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Serialize, Deserialize)]
struct GateRecord {
    layer: EdgeLayer,
    i: usize,
    j: usize,
    h_i: f64,
    h_j: f64,
}

#[derive(Serialize, Deserialize)]
struct CircuitRecord {
    lattice: LatticeSpec,
    j_over_pi: f64,
    coupling: f64,
    n_f: usize,
    seed: u64,
    gates: Vec<GateRecord>,
}

impl From<FloquetCircuit> for CircuitRecord {
    fn from(c: FloquetCircuit) -> Self {
        let mut gates = Vec::with_capacity(c.gates.len());
        for layer in EdgeLayer::ALL {
            for g in c.layer(layer) {
                gates.push(GateRecord { layer, i: g.i, j: g.j, h_i: g.h_i, h_j: g.h_j });
            }
        }
        CircuitRecord {
            j_over_pi: c.coupling / PI,
            coupling: c.coupling,
            n_f: c.n_f,
            seed: c.seed,
            lattice: c.lattice,
            gates,
        }
    }
}

impl TryFrom<CircuitRecord> for FloquetCircuit {
    type Error = Error;

    fn try_from(r: CircuitRecord) -> Result<Self> {
        check_coupling(r.coupling)?;
        if r.n_f == 0 {
            return Err(Error::param("cycle count n_F must be at least 1"));
        }
        let mut gates = Vec::with_capacity(r.gates.len());
        let mut offsets = [0usize; 5];
        for layer in EdgeLayer::ALL {
            let expected = r.lattice.layer(layer);
            let listed: Vec<&GateRecord> = r.gates.iter().filter(|g| g.layer == layer).collect();
            if listed.len() != expected.len() {
                return Err(Error::param(format!("layer {layer:?}: expected {} gates, found {}", expected.len(), listed.len())));
            }
            for (g, e) in listed.into_iter().zip(expected) {
                if (g.i, g.j) != (e.i, e.j) {
                    return Err(Error::param(format!("gate ({}, {}) does not match lattice edge ({}, {})", g.i, g.j, e.i, e.j)));
                }
                gates.push(TwoQubitGate::new(g.i, g.j, r.coupling, g.h_i, g.h_j)?);
            }
            offsets[layer.index() + 1] = gates.len();
        }
        Ok(FloquetCircuit { lattice: r.lattice, coupling: r.coupling, n_f: r.n_f, seed: r.seed, gates, offsets })
    }
}
