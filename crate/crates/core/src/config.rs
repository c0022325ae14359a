//! Experiment configuration and resource limits.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{EntropyBase, StderrMode, DEFAULT_BATCHES, DEFAULT_EPSILON};
use crate::lattice::{LatticeSpec, DEFAULT_MAX_QUBITS};
use crate::samples::{Patch, PatchShape};
use crate::spectrum::DEFAULT_MAX_SPECTRUM_DIM;
use crate::state::DEFAULT_MAX_AMPLITUDES;

/// Resource caps, read from the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_qubits: usize,
    pub max_sector_dim: usize,
    pub max_spectrum_dim: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_qubits: DEFAULT_MAX_QUBITS, max_sector_dim: DEFAULT_MAX_AMPLITUDES, max_spectrum_dim: DEFAULT_MAX_SPECTRUM_DIM }
    }
}

pub const ENV_MAX_QUBITS: &str = "HFLOQUET_MAX_QUBITS";
pub const ENV_MAX_SECTOR_DIM: &str = "HFLOQUET_MAX_SECTOR_DIM";
pub const ENV_MAX_SPECTRUM_DIM: &str = "HFLOQUET_MAX_SPECTRUM_DIM";

impl Limits {
    pub fn from_env() -> Result<Self> {
        let mut limits = Limits::default();
        for (name, slot) in [
            (ENV_MAX_QUBITS, &mut limits.max_qubits),
            (ENV_MAX_SECTOR_DIM, &mut limits.max_sector_dim),
            (ENV_MAX_SPECTRUM_DIM, &mut limits.max_spectrum_dim),
        ] {
            if let Ok(v) = std::env::var(name) {
                *slot = v.trim().parse().map_err(|_| Error::param(format!("{name} must be a positive integer, got `{v}`")))?;
            }
        }
        Ok(limits)
    }
}

/// Linear grid of couplings in units of π, endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl JGrid {
    /// Couplings in units of π.
    pub fn values_over_pi(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            c => (0..c).map(|i| self.start + (self.stop - self.start) * i as f64 / (c - 1) as f64).collect(),
        }
    }

    /// Couplings in radians.
    pub fn values(&self) -> Vec<f64> {
        self.values_over_pi().into_iter().map(|j| j * PI).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::param("J grid needs at least one point"));
        }
        if self.count > 1 && !(self.stop > self.start) {
            return Err(Error::param("J grid stop must exceed start"));
        }
        if self.start < 0.0 || self.stop > 0.25 || (self.count == 1 && self.start > 0.25) {
            return Err(Error::param("J/pi must lie in [0, 0.25]"));
        }
        Ok(())
    }
}

/// Where patches of one shape are placed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Placement {
    Central,
    Anchor(usize, usize),
    All,
    /// `count` translations chosen by seed.
    Sample(usize),
}

impl std::str::FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param(format!("placement `{s}` must be central, all, all:<count> or <x>,<y>"));
        match s.trim() {
            "central" => Ok(Placement::Central),
            "all" => Ok(Placement::All),
            t if t.starts_with("all:") => t[4..].parse().ok().filter(|&c| c > 0).map(Placement::Sample).ok_or_else(bad),
            t => {
                let (x, y) = t.split_once(',').ok_or_else(bad)?;
                Ok(Placement::Anchor(x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
            }
        }
    }
}

/// A patch shape with its placement rule, e.g. `2x2` at `all:16`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub shape: String,
    #[serde(default = "default_placement")]
    pub placement: String,
}

fn default_placement() -> String {
    "central".to_string()
}

impl PatchSpec {
    pub fn new(shape: &str, placement: &str) -> Self {
        PatchSpec { shape: shape.to_string(), placement: placement.to_string() }
    }

    pub fn shape(&self) -> Result<PatchShape> {
        self.shape.parse()
    }

    pub fn resolve(&self, lattice: &LatticeSpec, seed: u64) -> Result<Vec<Patch>> {
        let shape = self.shape()?;
        match self.placement.parse::<Placement>()? {
            Placement::Central => Ok(vec![Patch::central(lattice, shape)?]),
            Placement::Anchor(x, y) => Ok(vec![Patch::rect(lattice, shape, x, y)?]),
            Placement::All => Patch::translations(lattice, shape),
            Placement::Sample(c) => Patch::sampled_translations(lattice, shape, c, seed),
        }
    }
}

/// Everything needed to reproduce one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lx: usize,
    pub ly: usize,
    pub j_grid: JGrid,
    pub n_f: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub realizations: usize,
    #[serde(default = "default_patches")]
    pub patches: Vec<PatchSpec>,
    /// `exact`, `parseval` or `sampled`.
    #[serde(default = "default_source")]
    pub source: String,
    #[serde(default = "default_n_s")]
    pub n_s: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default)]
    pub stderr_mode: StderrMode,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default)]
    pub base: EntropyBase,
    /// `none`, `hamming`, `lec` or `parseval-hamming`.
    #[serde(default = "default_mitigation")]
    pub mitigation: String,
    /// Synthetic per-bit flip probability applied to samples.
    #[serde(default)]
    pub noise_p: f64,
    #[serde(default = "default_lec_anchor")]
    pub lec_anchor_over_pi: f64,
    /// `per-patch` or `global`.
    #[serde(default = "default_lec_mode")]
    pub lec_mode: String,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Gap-ratio statistics of `U_F` per grid point.
    #[serde(default)]
    pub spectrum: bool,
    /// Porter–Thomas test of the first realization per grid point.
    #[serde(default)]
    pub porter_thomas: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}
fn default_patches() -> Vec<PatchSpec> {
    vec![PatchSpec::new("1x1", "central")]
}
fn default_source() -> String {
    "exact".into()
}
fn default_n_s() -> usize {
    10_000
}
fn default_batches() -> usize {
    DEFAULT_BATCHES
}
fn default_orders() -> Vec<usize> {
    vec![2]
}
fn default_mitigation() -> String {
    "none".into()
}
fn default_lec_anchor() -> f64 {
    0.005
}
fn default_lec_mode() -> String {
    "per-patch".into()
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(lx: usize, ly: usize, j_grid: JGrid, n_f: usize) -> Self {
        ExperimentConfig {
            lx,
            ly,
            j_grid,
            n_f,
            seed: 0,
            realizations: 1,
            patches: default_patches(),
            source: default_source(),
            n_s: default_n_s(),
            batches: default_batches(),
            stderr_mode: StderrMode::Batch,
            orders: default_orders(),
            base: EntropyBase::Bits,
            mitigation: default_mitigation(),
            noise_p: 0.0,
            lec_anchor_over_pi: default_lec_anchor(),
            lec_mode: default_lec_mode(),
            epsilon: default_epsilon(),
            spectrum: false,
            porter_thomas: false,
            output_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::format("<config>", e.span().map_or(0, |s| s.start), e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::param(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self, limits: &Limits) -> Result<LatticeSpec> {
        let lattice = LatticeSpec::with_budget(self.lx, self.ly, limits.max_qubits)?;
        self.j_grid.validate()?;
        if self.n_f == 0 {
            return Err(Error::param("n_f must be at least 1"));
        }
        if self.realizations == 0 {
            return Err(Error::param("realizations must be at least 1"));
        }
        if self.patches.is_empty() {
            return Err(Error::param("at least one patch spec is required"));
        }
        for p in &self.patches {
            p.resolve(&lattice, self.seed)?;
        }
        if self.orders.is_empty() || self.orders.iter().any(|&k| k < 2) {
            return Err(Error::param("Renyi orders must be integers >= 2"));
        }
        if self.n_s < 2 || self.batches == 0 {
            return Err(Error::param("n_s must be at least 2 and batches at least 1"));
        }
        if !(0.0..0.5).contains(&self.noise_p) {
            return Err(Error::param("noise_p must lie in [0, 0.5)"));
        }
        if self.noise_p > 0.0 && self.source != "sampled" {
            return Err(Error::param("synthetic noise needs source = \"sampled\""));
        }
        if matches!(self.mitigation.as_str(), "hamming" | "parseval-hamming") && self.source != "sampled" {
            return Err(Error::param(format!("mitigation `{}` needs source = \"sampled\"", self.mitigation)));
        }
        if !matches!(self.lec_mode.as_str(), "per-patch" | "global") {
            return Err(Error::param("lec_mode must be per-patch or global"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::param("epsilon must be positive"));
        }
        Ok(lattice)
    }

    /// SHA-256 of the canonical JSON form, with the output directory left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let value = serde_json::to_value(&canonical).expect("config serializes");
        // serde_json maps are ordered by key, so this text is canonical
        let text = serde_json::to_string(&value).expect("value serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
