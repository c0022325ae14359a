//! Exact simulation and ergodicity statistics for disordered Heisenberg
//! Floquet circuits on a 2D grid.

pub mod basis;
pub mod circuit;
pub mod compile;
pub mod config;
pub mod density;
pub mod error;
pub mod estimators;
pub mod gate;
pub mod io;
pub mod lattice;
pub mod mitigation;
pub mod rmt;
pub mod rng;
pub mod samples;
pub mod sources;
pub mod spectrum;
pub mod state;
pub mod sweep;

pub use circuit::FloquetCircuit;
pub use error::{Error, Result};
pub use lattice::{EdgeLayer, LatticeSpec};
pub use samples::{Patch, PatchShape, SampleSet};
pub use state::{FullState, PureState, SectorState};
