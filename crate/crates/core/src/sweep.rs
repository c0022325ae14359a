//! Sweep orchestration: build → evolve → measure → estimate → mitigate → J*.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::FloquetCircuit;
use crate::config::{ExperimentConfig, Limits};
use crate::error::{Error, Result};
use crate::estimators::{collision_entropy, spatial_average, DiagnosticCurve, EntropyBase};
use crate::lattice::LatticeSpec;
use crate::mitigation::{
    apply_bitflip_channel, fit_pflip, hamming_pmf, lec_calibrate_global, MitigationOptions, MitigatorRegistry,
    PatchSeries,
};
use crate::rmt::{gap_ratios, histogram_density, porter_thomas_ks, u1_haar_marginal_ipr};
use crate::rng::realization_seed;
use crate::samples::{Patch, SampleSet};
use crate::sources::{SourceOptions, SourceRegistry};
use crate::spectrum::floquet_eigenphases_with_cap;
use crate::state::SectorState;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Number of bins in the exported gap-ratio histograms.
pub const GAP_BINS: usize = 20;
/// Number of bins, over `D·p ∈ [0, PT_RANGE]`, in Porter–Thomas histograms.
pub const PT_BINS: usize = 32;
pub const PT_RANGE: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchInfo {
    pub label: String,
    pub shape: String,
    /// Index into the config's patch specs.
    pub spec: usize,
    pub qubits: Vec<usize>,
}

/// Aggregated numbers for one `(J, patch, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub j_over_pi: f64,
    pub patch: String,
    pub k: usize,
    pub raw: f64,
    pub raw_stderr: f64,
    pub mitigated: f64,
    pub mitigated_stderr: f64,
    /// Exact marginal moment (mean over realizations).
    pub exact: f64,
    pub entropy: f64,
    pub entropy_stderr: f64,
    pub reference_moment: Option<f64>,
    pub reference_entropy: Option<f64>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub j_over_pi: f64,
    pub mean_r: f64,
    pub stderr: f64,
    /// Densities on `GAP_BINS` equal bins over `[0, 1]`.
    pub histogram: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PorterThomasPoint {
    pub j_over_pi: f64,
    pub dim: usize,
    pub ks: f64,
    /// Densities of `D·p` on `PT_BINS` equal bins over `[0, PT_RANGE]`.
    pub histogram: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightPoint {
    pub j_over_pi: f64,
    pub histogram: Vec<u64>,
    pub p: f64,
    pub pmf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub name: String,
    pub k: usize,
    pub averaged: bool,
    pub curve: DiagnosticCurve,
}

/// Everything one sweep produced, traceable to its config hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub tool_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub n: usize,
    pub weight: usize,
    pub patches: Vec<PatchInfo>,
    pub entries: Vec<Entry>,
    pub curves: Vec<CurveRecord>,
    pub spectra: Vec<SpectrumPoint>,
    pub porter_thomas: Vec<PorterThomasPoint>,
    pub weights: Vec<WeightPoint>,
}

impl ResultRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Entries for one patch and order, in grid order.
    pub fn series(&self, patch: &str, k: usize) -> Vec<&Entry> {
        self.entries.iter().filter(|e| e.patch == patch && e.k == k).collect()
    }

    pub fn curve(&self, name: &str, k: usize) -> Option<&DiagnosticCurve> {
        self.curves.iter().find(|c| c.name == name && c.k == k).map(|c| &c.curve)
    }
}

/// Per-grid-point cell before curve-level mitigation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Cell {
    raw: f64,
    raw_stderr: f64,
    mitigated: f64,
    mitigated_stderr: f64,
    exact: f64,
    flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct JPoint {
    j_over_pi: f64,
    /// Indexed `[patch][order]`.
    cells: Vec<Vec<Cell>>,
    spectrum: Option<SpectrumPoint>,
    porter_thomas: Option<PorterThomasPoint>,
    weights: Option<WeightPoint>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    config_hash: String,
    point: JPoint,
}

struct RealizationOut {
    /// Indexed `[patch][order]`.
    cells: Vec<Vec<Cell>>,
    ratios: Option<Vec<f64>>,
    probabilities: Option<Vec<f64>>,
    samples: Option<SampleSet>,
}

struct Plan {
    cfg: ExperimentConfig,
    lattice: LatticeSpec,
    limits: Limits,
    patches: Vec<(Patch, PatchInfo)>,
    weight: usize,
    hash: String,
}

fn mean_and_se(values: &[f64], single_se: f64) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, single_se);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn run_realization(plan: &Plan, j_index: usize, j: f64, r: usize) -> Result<RealizationOut> {
    let cfg = &plan.cfg;
    let rseed = realization_seed(cfg.seed, r as u64);
    let circuit = FloquetCircuit::build(&plan.lattice, j, cfg.n_f, rseed)?;
    let mut state = SectorState::neel_with_cap(&plan.lattice, plan.limits.max_sector_dim)?;
    state.evolve(&circuit)?;

    let sources = SourceRegistry::with_defaults();
    let source = sources.create(&cfg.source)?;
    let exact = sources.create("exact")?;
    let options = SourceOptions { batches: cfg.batches, stderr_mode: cfg.stderr_mode };
    let samples = if source.needs_samples() {
        let sample_seed = realization_seed(rseed, j_index as u64);
        let clean = state.sample(cfg.n_s, sample_seed)?;
        Some(if cfg.noise_p > 0.0 { apply_bitflip_channel(&clean, cfg.noise_p, sample_seed)? } else { clean })
    } else {
        None
    };

    let registry = MitigatorRegistry::with_defaults();
    let mitigator = registry.create(&cfg.mitigation, &MitigationOptions::default())?;
    let mut cells = Vec::with_capacity(plan.patches.len());
    for (patch, _) in &plan.patches {
        let mut row = Vec::with_capacity(cfg.orders.len());
        for &k in &cfg.orders {
            let raw = source.moment(&state, samples.as_ref(), patch, k, &options)?;
            let ex = exact.moment(&state, None, patch, k, &options)?.value;
            let (mut mit, mut mit_se, mut flags) = (raw.value, raw.stderr, Vec::new());
            if k == 2 && mitigator.per_point() {
                let curve = DiagnosticCurve::new(vec![j], vec![raw.value], vec![raw.stderr])?;
                let sets = samples.as_ref().map(std::slice::from_ref);
                let series = PatchSeries {
                    patch,
                    raw: &curve,
                    samples: sets,
                    weight: plan.weight,
                    exact_anchor: None,
                    batches: cfg.batches,
                };
                let out = mitigator.mitigate(&series)?;
                mit = out.values[0];
                mit_se = out.stderr[0];
                flags = out.flags[0].clone();
            }
            row.push(Cell {
                raw: raw.value,
                raw_stderr: raw.stderr,
                mitigated: mit,
                mitigated_stderr: mit_se,
                exact: ex,
                flags,
            });
        }
        cells.push(row);
    }

    let ratios = if cfg.spectrum {
        let set = floquet_eigenphases_with_cap(&circuit, plan.weight, plan.limits.max_spectrum_dim)?;
        Some(gap_ratios(&set.phases, true)?.ratios)
    } else {
        None
    };
    let probabilities = (cfg.porter_thomas && r == 0).then(|| state.probabilities());
    Ok(RealizationOut { cells, ratios, probabilities, samples: if r == 0 { samples } else { None } })
}

fn compute_point(plan: &Plan, j_index: usize, j_over_pi: f64) -> Result<JPoint> {
    let cfg = &plan.cfg;
    let j = j_over_pi * PI;
    let outs: Vec<RealizationOut> =
        (0..cfg.realizations).into_par_iter().map(|r| run_realization(plan, j_index, j, r)).collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(plan.patches.len());
    for p in 0..plan.patches.len() {
        let mut row = Vec::with_capacity(cfg.orders.len());
        for o in 0..cfg.orders.len() {
            let pick = |f: fn(&Cell) -> f64| -> Vec<f64> {
                outs.iter().map(|r| f(&r.cells[p][o])).collect()
            };
            let single = &outs[0].cells[p][o];
            let (raw, raw_stderr) = mean_and_se(&pick(|c| c.raw), single.raw_stderr);
            let (mitigated, mitigated_stderr) = mean_and_se(&pick(|c| c.mitigated), single.mitigated_stderr);
            let exact = pick(|c| c.exact).iter().sum::<f64>() / outs.len() as f64;
            let mut flags: Vec<String> = outs.iter().flat_map(|r| r.cells[p][o].flags.iter().cloned()).collect();
            flags.sort();
            flags.dedup();
            row.push(Cell { raw, raw_stderr, mitigated, mitigated_stderr, exact, flags });
        }
        cells.push(row);
    }

    let spectrum = if cfg.spectrum {
        let means: Vec<f64> = outs
            .iter()
            .map(|o| o.ratios.as_ref().map_or(f64::NAN, |r| r.iter().sum::<f64>() / r.len() as f64))
            .collect();
        let (mean_r, stderr) = mean_and_se(&means, 0.0);
        let all: Vec<f64> = outs.iter().flat_map(|o| o.ratios.iter().flatten().copied()).collect();
        let histogram = histogram_density(&all, GAP_BINS, 0.0, 1.0).into_iter().map(|b| b.1).collect();
        Some(SpectrumPoint { j_over_pi, mean_r, stderr, histogram })
    } else {
        None
    };

    let porter_thomas = match &outs[0].probabilities {
        Some(p) => {
            let d = p.len();
            let scaled: Vec<f64> = p.iter().map(|x| x * d as f64).collect();
            Some(PorterThomasPoint {
                j_over_pi,
                dim: d,
                ks: porter_thomas_ks(p, d as u64)?,
                histogram: histogram_density(&scaled, PT_BINS, 0.0, PT_RANGE).into_iter().map(|b| b.1).collect(),
            })
        }
        None => None,
    };

    let weights = match &outs[0].samples {
        Some(s) => {
            let histogram = s.weight_histogram();
            let h: Vec<f64> = histogram.iter().map(|&c| c as f64).collect();
            let fit = fit_pflip(&h, s.n(), plan.weight)?;
            Some(WeightPoint { j_over_pi, histogram, p: fit.p, pmf: hamming_pmf(s.n(), plan.weight, fit.p)? })
        }
        None => None,
    };

    Ok(JPoint { j_over_pi, cells, spectrum, porter_thomas, weights })
}

fn checkpoint_path(dir: &Path, j_index: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("j{j_index:04}.json"))
}

fn load_checkpoint(path: &Path, hash: &str) -> Option<JPoint> {
    let text = fs::read_to_string(path).ok()?;
    let cp: Checkpoint = serde_json::from_str(&text).ok()?;
    (cp.config_hash == hash).then_some(cp.point)
}

fn store_checkpoint(path: &Path, hash: &str, point: &JPoint) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("json.tmp");
    let cp = Checkpoint { config_hash: hash.to_string(), point: point.clone() };
    fs::write(&tmp, serde_json::to_string(&cp)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn entropy_of(value: f64, stderr: f64, k: usize, n_a: usize, base: EntropyBase) -> Result<(f64, f64, bool)> {
    let floor = 2f64.powi(-(n_a as i32)).powi(k as i32 - 1);
    let clamped = !(value >= floor);
    let v = if clamped { floor } else { value.min(1.0) };
    let s = collision_entropy(v, k, base)?;
    let scale = match base {
        EntropyBase::Bits => std::f64::consts::LN_2,
        EntropyBase::Nats => 1.0,
    };
    Ok((s, stderr / (v * scale * (k as f64 - 1.0)), clamped))
}

fn plan(config: &ExperimentConfig, limits: Limits) -> Result<Plan> {
    let lattice = config.validate(&limits)?;
    let weight = crate::state::neel_bits(&lattice)?.count_ones() as usize;
    let mut patches = Vec::new();
    for (spec_index, spec) in config.patches.iter().enumerate() {
        for p in spec.resolve(&lattice, config.seed)? {
            let info = PatchInfo { label: p.label(), shape: spec.shape.clone(), spec: spec_index, qubits: p.qubits().to_vec() };
            patches.push((p, info));
        }
    }
    // the registries validate names up front
    SourceRegistry::with_defaults().create(&config.source)?;
    MitigatorRegistry::with_defaults().create(&config.mitigation, &MitigationOptions::default())?;
    Ok(Plan { cfg: config.clone(), lattice, limits, patches, weight, hash: config.hash() })
}

/// Runs a full sweep. With an output directory set, each grid point is
/// checkpointed and reused on rerun when the config hash matches.
pub fn run_sweep(config: &ExperimentConfig, limits: Limits) -> Result<ResultRecord> {
    let plan = plan(config, limits)?;
    let cfg = &plan.cfg;
    let grid = cfg.j_grid.values_over_pi();
    let mut points = Vec::with_capacity(grid.len());
    for (j_index, &jp) in grid.iter().enumerate() {
        let cached = cfg.output_dir.as_ref().and_then(|d| load_checkpoint(&checkpoint_path(d, j_index), &plan.hash));
        let point = match cached {
            Some(p) => p,
            None => {
                log::info!("sweep point {}/{} at J/pi = {jp}", j_index + 1, grid.len());
                let p = compute_point(&plan, j_index, jp)?;
                if let Some(d) = &cfg.output_dir {
                    store_checkpoint(&checkpoint_path(d, j_index), &plan.hash, &p)?;
                }
                p
            }
        };
        points.push(point);
    }
    assemble(&plan, &grid, points)
}

fn assemble(plan: &Plan, grid: &[f64], mut points: Vec<JPoint>) -> Result<ResultRecord> {
    let cfg = &plan.cfg;
    let n = plan.lattice.n();
    let j_rad: Vec<f64> = grid.iter().map(|j| j * PI).collect();
    let k2 = cfg.orders.iter().position(|&k| k == 2);

    // curve-level mitigation on the k = 2 moments
    let registry = MitigatorRegistry::with_defaults();
    let probe = registry.create(&cfg.mitigation, &MitigationOptions::default())?;
    if let (Some(o), false) = (k2, probe.per_point()) {
        let j0 = cfg.lec_anchor_over_pi * PI;
        let raw_curves: Vec<DiagnosticCurve> = (0..plan.patches.len())
            .map(|p| {
                DiagnosticCurve::new(
                    j_rad.clone(),
                    points.iter().map(|pt| pt.cells[p][o].raw).collect(),
                    points.iter().map(|pt| pt.cells[p][o].raw_stderr).collect(),
                )
            })
            .collect::<Result<_>>()?;
        let anchor = grid
            .iter()
            .position(|&j| (j - cfg.lec_anchor_over_pi).abs() <= 1e-9)
            .ok_or_else(|| Error::Calibration(format!("LEC anchor J/pi = {} is not on the grid", cfg.lec_anchor_over_pi)))?;
        let exact_at: Vec<f64> = (0..plan.patches.len()).map(|p| points[anchor].cells[p][o].exact).collect();
        let global = if cfg.lec_mode == "global" {
            let triples: Vec<(&DiagnosticCurve, f64, usize)> =
                raw_curves.iter().zip(&plan.patches).zip(&exact_at).map(|((c, (p, _)), &e)| (c, e, p.len())).collect();
            Some(lec_calibrate_global(&triples, j0)?)
        } else {
            None
        };
        let mitigator = registry.create(&cfg.mitigation, &MitigationOptions { lec_anchor: j0, lec_global: global })?;
        for (p, (patch, _)) in plan.patches.iter().enumerate() {
            let series = PatchSeries {
                patch,
                raw: &raw_curves[p],
                samples: None,
                weight: plan.weight,
                exact_anchor: Some(exact_at[p]),
                batches: cfg.batches,
            };
            let out = mitigator.mitigate(&series)?;
            for (i, pt) in points.iter_mut().enumerate() {
                let cell = &mut pt.cells[p][o];
                cell.mitigated = out.values[i];
                cell.mitigated_stderr = out.stderr[i];
                cell.flags.extend(out.flags[i].iter().cloned());
            }
        }
    }

    let mut entries = Vec::new();
    let mut curves = Vec::new();
    for (p, (patch, info)) in plan.patches.iter().enumerate() {
        let n_a = patch.len();
        for (o, &k) in cfg.orders.iter().enumerate() {
            let reference_moment = (k == 2).then(|| u1_haar_marginal_ipr(n_a as u64, (n - n_a) as u64, plan.weight as u64)).transpose()?;
            let reference_entropy = reference_moment.map(|m| collision_entropy(m, 2, cfg.base)).transpose()?;
            let mut values = Vec::with_capacity(grid.len());
            let mut errs = Vec::with_capacity(grid.len());
            for (i, pt) in points.iter().enumerate() {
                let c = &pt.cells[p][o];
                let (entropy, entropy_stderr, clamped) = entropy_of(c.mitigated, c.mitigated_stderr, k, n_a, cfg.base)?;
                let mut flags = c.flags.clone();
                if clamped {
                    flags.push("entropy_clamped".to_string());
                }
                values.push(entropy);
                errs.push(entropy_stderr);
                entries.push(Entry {
                    j_over_pi: grid[i],
                    patch: info.label.clone(),
                    k,
                    raw: c.raw,
                    raw_stderr: c.raw_stderr,
                    mitigated: c.mitigated,
                    mitigated_stderr: c.mitigated_stderr,
                    exact: c.exact,
                    entropy,
                    entropy_stderr,
                    reference_moment,
                    reference_entropy,
                    flags,
                });
            }
            let mut curve = DiagnosticCurve::new(j_rad.clone(), values, errs)?;
            curve.system = plan.lattice.label();
            curve.patch = info.label.clone();
            curve.n_f = cfg.n_f;
            curve.seed = cfg.seed;
            curve.base = cfg.base;
            curve.epsilon = cfg.epsilon;
            if let Some(r) = reference_entropy {
                curve = curve.with_reference(r, cfg.epsilon);
            }
            curves.push(CurveRecord { name: info.label.clone(), k, averaged: false, curve });
        }
    }

    // spatial averages over every spec that placed more than one patch
    for (s, spec) in cfg.patches.iter().enumerate() {
        for &k in &cfg.orders {
            let members: Vec<DiagnosticCurve> = plan
                .patches
                .iter()
                .zip(curves.iter().filter(|c| c.k == k && !c.averaged))
                .filter(|((_, info), _)| info.spec == s)
                .map(|(_, c)| c.curve.clone())
                .collect();
            if members.len() > 1 {
                let mut avg = spatial_average(&members)?;
                avg.patch = format!("{}@avg", spec.shape);
                curves.push(CurveRecord { name: avg.patch.clone(), k, averaged: true, curve: avg });
            }
        }
    }

    Ok(ResultRecord {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: plan.hash.clone(),
        config: cfg.clone(),
        n,
        weight: plan.weight,
        patches: plan.patches.iter().map(|(_, i)| i.clone()).collect(),
        entries,
        curves,
        spectra: points.iter().filter_map(|p| p.spectrum.clone()).collect(),
        porter_thomas: points.iter().filter_map(|p| p.porter_thomas.clone()).collect(),
        weights: points.iter().filter_map(|p| p.weights.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{JGrid, PatchSpec};

    #[test]
    fn zero_coupling_gives_zero_entropy() {
        let mut cfg = ExperimentConfig::new(2, 2, JGrid { start: 0.0, stop: 0.0, count: 1 }, 3);
        cfg.patches = vec![PatchSpec::new("1x1", "all"), PatchSpec::new("2x2", "central")];
        let rec = run_sweep(&cfg, Limits::default()).unwrap();
        assert_eq!(rec.entries.len(), 5);
        assert!(rec.entries.iter().all(|e| e.entropy.abs() < 1e-12));
        assert!(rec.curve("1x1@avg", 2).is_some());
    }

    #[test]
    fn rerun_is_identical() {
        let mut cfg = ExperimentConfig::new(3, 2, JGrid { start: 0.05, stop: 0.2, count: 3 }, 2);
        cfg.source = "sampled".into();
        cfg.n_s = 2000;
        cfg.realizations = 3;
        cfg.noise_p = 0.02;
        cfg.mitigation = "hamming".into();
        cfg.spectrum = true;
        cfg.porter_thomas = true;
        let a = run_sweep(&cfg, Limits::default()).unwrap().to_json().unwrap();
        let b = run_sweep(&cfg, Limits::default()).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let rec = ResultRecord::from_json(&a).unwrap();
        assert_eq!(rec.spectra.len(), 3);
        assert_eq!(rec.weights.len(), 3);
    }
}
