//! Synthetic readout noise and post-processing mitigation of collision
//! probabilities.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{walsh_hadamard, DiagnosticCurve, DEFAULT_BATCHES};
use crate::rng::{self, Domain};
use crate::samples::{Patch, SampleSet};

/// Default LEC anchor, `J₀ = 0.005π`.
pub const DEFAULT_LEC_ANCHOR: f64 = 0.005 * std::f64::consts::PI;

/// Largest patch for per-string inflation.
pub const MAX_PIPELINE_QUBITS: usize = 4;

const SHOT_BLOCK: usize = 4096;

/// Flips every bit of every shot independently with probability `p`.
pub fn apply_bitflip_channel(samples: &SampleSet, p: f64, seed: u64) -> Result<SampleSet> {
    check_flip_probability(p)?;
    let n = samples.n();
    let shots: Vec<u128> = samples
        .shots()
        .par_chunks(SHOT_BLOCK)
        .enumerate()
        .flat_map_iter(|(block, chunk)| {
            let mut rng = rng::stream(seed, Domain::Noise, block as u64, 0);
            chunk
                .iter()
                .map(|&s| {
                    let mut mask = 0u128;
                    for b in 0..n {
                        if rng.random::<f64>() < p {
                            mask |= 1 << b;
                        }
                    }
                    s ^ mask
                })
                .collect::<Vec<_>>()
        })
        .collect();
    SampleSet::from_shots(n, shots)
}

fn check_flip_probability(p: f64) -> Result<()> {
    if !(0.0..0.5).contains(&p) {
        return Err(Error::param(format!("flip probability must lie in [0, 0.5), got {p}")));
    }
    Ok(())
}

fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

/// Output-weight distribution of a weight-`m` string of `n` bits after
/// independent flips with probability `p`.
pub fn hamming_pmf(n: usize, m: usize, p: f64) -> Result<Vec<f64>> {
    if m > n || !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("hamming_pmf needs m <= n and p in [0, 1], got n={n} m={m} p={p}")));
    }
    let q = 1.0 - p;
    Ok((0..=n)
        .map(|h| {
            let lo = m.saturating_sub(h);
            let hi = m.min(n - h);
            (lo..=hi)
                .map(|d| {
                    let up = h + d - m;
                    choose(m, d) * choose(n - m, up) * p.powi((up + d) as i32) * q.powi((n + m - h - 2 * d) as i32)
                })
                .sum()
        })
        .collect())
}

/// Fitted single-parameter flip model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipModel {
    pub p: f64,
    pub alpha: f64,
    pub n: usize,
    pub m: usize,
    /// Squared distance between the normalized histogram and the fitted pmf.
    pub residual: f64,
    /// Set when the optimum sits on the upper end of the search range.
    pub at_boundary: bool,
}

impl FlipModel {
    pub fn new(p: f64, n: usize, m: usize) -> Result<Self> {
        check_flip_probability(p)?;
        Ok(FlipModel { p, alpha: (1.0 - p).powi(2) + p * p, n, m, residual: 0.0, at_boundary: false })
    }
}

const FIT_UPPER: f64 = 0.5 - 1e-9;
const FIT_TOL: f64 = 1e-6;

/// Least-squares fit of `p` to a weight histogram over `0..=n`.
pub fn fit_pflip(histogram: &[f64], n: usize, m: usize) -> Result<FlipModel> {
    if histogram.len() != n + 1 || m > n {
        return Err(Error::param(format!("histogram must have n+1 = {} bins and m <= n", n + 1)));
    }
    let total: f64 = histogram.iter().sum();
    if !(total > 0.0) || histogram.iter().any(|&c| c < 0.0) {
        return Err(Error::param("histogram must be non-negative with positive total"));
    }
    let target: Vec<f64> = histogram.iter().map(|c| c / total).collect();
    let cost = |p: f64| -> f64 {
        hamming_pmf(n, m, p).expect("validated").iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum()
    };
    const GRID: usize = 64;
    let step = 0.5 / GRID as f64;
    let best = (0..GRID).map(|i| i as f64 * step).min_by(|a, b| cost(*a).total_cmp(&cost(*b))).unwrap_or(0.0);
    let (mut a, mut b) = ((best - step).max(0.0), (best + step).min(FIT_UPPER));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (cost(c), cost(d));
    while b - a > FIT_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    // the bracket ends are candidates too, so p = 0 is reachable exactly
    let p = [a, (a + b) / 2.0, b, 0.0].into_iter().min_by(|x, y| cost(*x).total_cmp(&cost(*y))).unwrap_or(0.0);
    let mut model = FlipModel::new(p.min(FIT_UPPER), n, m)?;
    model.residual = cost(model.p);
    model.at_boundary = model.p > 0.5 - 1e-3;
    if model.at_boundary {
        log::warn!("flip-probability fit reached the boundary p = {:.6}", model.p);
    }
    Ok(model)
}

/// A mitigated value with the factor applied and any flags raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mitigated {
    pub value: f64,
    /// Multiplier applied to the deviation from the fixed point (and to stderr).
    pub factor: f64,
    pub flags: Vec<String>,
}

/// `raw · (1 − 2p)^{−r}` for a weight-`r` Z string.
pub fn mitigate_z_string(raw: f64, p: f64, r: usize) -> Result<Mitigated> {
    check_flip_probability(p)?;
    let factor = (1.0 - 2.0 * p).powi(-(r as i32));
    let value = raw * factor;
    let mut flags = Vec::new();
    if value.abs() > 1.0 {
        flags.push("out_of_bounds".to_string());
    }
    Ok(Mitigated { value, factor, flags })
}

/// `2^{−n_A} + α^{−n_A} (raw − 2^{−n_A})`, clamped below at `2^{−n_A}`.
pub fn mitigate_collision_rank1(raw: f64, p: f64, n_a: usize) -> Result<Mitigated> {
    check_flip_probability(p)?;
    let floor = 2f64.powi(-(n_a as i32));
    let alpha = (1.0 - p).powi(2) + p * p;
    let factor = alpha.powi(-(n_a as i32));
    let mut value = floor + factor * (raw - floor);
    let mut flags = Vec::new();
    if raw < floor {
        value = floor;
        flags.push("clamped".to_string());
    }
    if value > 1.0 {
        flags.push("out_of_bounds".to_string());
    }
    Ok(Mitigated { value, factor, flags })
}

/// IPR after a depolarizing channel of strength `p` acts on `ρ_A`.
pub fn depolarize_ipr(ipr: f64, p: f64, n_a: usize) -> f64 {
    (1.0 - p).powi(2) * ipr + p * (2.0 - p) * 2f64.powi(-(n_a as i32))
}

/// Inverse of [`depolarize_ipr`] for a known strength.
pub fn invert_depolarizing(raw: f64, p: f64, n_a: usize) -> Result<Mitigated> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::param(format!("depolarizing strength must lie in [0, 1), got {p}")));
    }
    let floor = 2f64.powi(-(n_a as i32));
    let factor = (1.0 - p).powi(-2);
    let value = floor + factor * (raw - floor);
    let flags = if value > 1.0 { vec!["out_of_bounds".to_string()] } else { Vec::new() };
    Ok(Mitigated { value, factor, flags })
}

/// `ΔQ = IPR − 2^{−n_A}`.
pub fn delta_q(ipr: f64, n_a: usize) -> f64 {
    ipr - 2f64.powi(-(n_a as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LecCalibration {
    pub j0: f64,
    pub r0: f64,
}

fn anchor_index(curve: &DiagnosticCurve, j0: f64) -> Result<usize> {
    curve
        .j
        .iter()
        .position(|&j| (j - j0).abs() <= 1e-9 * j0.abs().max(1.0))
        .ok_or_else(|| Error::Calibration(format!("anchor J0/pi = {} is not on the curve grid", j0 / std::f64::consts::PI)))
}

/// `R₀ = ΔQ_exact(J₀) / ΔQ_exp(J₀)` for one raw IPR curve.
pub fn lec_calibrate(raw_ipr: &DiagnosticCurve, exact_anchor_ipr: f64, n_a: usize, j0: f64) -> Result<LecCalibration> {
    let i = anchor_index(raw_ipr, j0)?;
    lec_ratio(&[(delta_q(exact_anchor_ipr, n_a), delta_q(raw_ipr.values[i], n_a))], j0)
}

/// One ratio over several patches: `Σ ΔQ_exact / Σ ΔQ_exp`.
pub fn lec_calibrate_global(curves: &[(&DiagnosticCurve, f64, usize)], j0: f64) -> Result<LecCalibration> {
    let pairs = curves
        .iter()
        .map(|&(c, exact, n_a)| Ok((delta_q(exact, n_a), delta_q(c.values[anchor_index(c, j0)?], n_a))))
        .collect::<Result<Vec<_>>>()?;
    lec_ratio(&pairs, j0)
}

fn lec_ratio(pairs: &[(f64, f64)], j0: f64) -> Result<LecCalibration> {
    let exact: f64 = pairs.iter().map(|p| p.0).sum();
    let measured: f64 = pairs.iter().map(|p| p.1).sum();
    if !(measured > 0.0) {
        return Err(Error::Calibration(format!("measured Delta Q at the anchor is {measured}, must be positive")));
    }
    let r0 = exact / measured;
    if !(r0 > 0.0) {
        return Err(Error::Calibration(format!("calibration ratio {r0} is not positive")));
    }
    Ok(LecCalibration { j0, r0 })
}

/// Rescales `ΔQ` (and stderr) of an IPR curve by `R₀`.
pub fn lec_apply(raw_ipr: &DiagnosticCurve, cal: LecCalibration, n_a: usize) -> Result<DiagnosticCurve> {
    let floor = 2f64.powi(-(n_a as i32));
    let values = raw_ipr.values.iter().map(|&v| floor + cal.r0 * delta_q(v, n_a)).collect();
    let stderr = raw_ipr.stderr.iter().map(|&s| s * cal.r0).collect();
    let mut out = DiagnosticCurve::new(raw_ipr.j.clone(), values, stderr)?;
    out.system = raw_ipr.system.clone();
    out.patch = raw_ipr.patch.clone();
    out.n_f = raw_ipr.n_f;
    out.seed = raw_ipr.seed;
    out.base = raw_ipr.base;
    Ok(out)
}

/// Per-patch LEC: calibrate on the anchor, then rescale the whole curve.
pub fn lec_mitigate(raw_ipr: &DiagnosticCurve, exact_anchor_ipr: f64, n_a: usize, j0: f64) -> Result<DiagnosticCurve> {
    let cal = lec_calibrate(raw_ipr, exact_anchor_ipr, n_a, j0)?;
    lec_apply(raw_ipr, cal, n_a)
}

/// Output of the sample-level Parseval pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineEstimate {
    pub value: f64,
    pub batches: usize,
    pub stderr: f64,
    /// Largest inflation factor `(1 − 2p)^{−2|s|}` used.
    pub max_factor: f64,
    pub flags: Vec<String>,
}

fn pipeline_on_shots(shots: &[u128], n_a: usize, p: f64) -> f64 {
    let d = 1usize << n_a;
    let mut sums = vec![0.0; d];
    for &s in shots {
        sums[s as usize] += 1.0;
    }
    walsh_hadamard(&mut sums);
    let n = shots.len() as f64;
    let shrink = (1.0 - 2.0 * p).powi(2);
    let mut total = 1.0;
    for (s, &sum) in sums.iter().enumerate().skip(1) {
        // unbiased estimate of ⟨Z_s⟩² from n ±1 outcomes
        let sq = (sum * sum - n) / (n * (n - 1.0));
        total += sq / shrink.powi(s.count_ones() as i32);
    }
    total / d as f64
}

/// Mitigated marginal IPR from samples: each `⟨Z_s⟩²` is estimated without
/// bias, inflated by `(1 − 2p)^{−2|s|}` and summed in the Parseval form.
pub fn mitigate_parseval_pipeline(samples: &SampleSet, patch: &Patch, model: &FlipModel) -> Result<PipelineEstimate> {
    mitigate_parseval_pipeline_batched(samples, patch, model, DEFAULT_BATCHES)
}

pub fn mitigate_parseval_pipeline_batched(
    samples: &SampleSet,
    patch: &Patch,
    model: &FlipModel,
    b: usize,
) -> Result<PipelineEstimate> {
    let n_a = patch.len();
    if n_a > MAX_PIPELINE_QUBITS {
        return Err(Error::param(format!(
            "per-string inflation is limited to {MAX_PIPELINE_QUBITS} qubits (patch has {n_a}); use the rank-1 collision correction"
        )));
    }
    check_flip_probability(model.p)?;
    if samples.len() < 2 {
        return Err(Error::param("the pipeline needs at least 2 samples"));
    }
    let restricted = samples.restrict(patch)?;
    let shots = restricted.shots();
    let value = pipeline_on_shots(shots, n_a, model.p);
    let b = b.clamp(1, (shots.len() / 2).max(1));
    let size = shots.len() / b;
    let per: Vec<f64> = shots.chunks_exact(size).take(b).map(|c| pipeline_on_shots(c, n_a, model.p)).collect();
    let mean = per.iter().sum::<f64>() / b as f64;
    let stderr = if b > 1 {
        (per.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / ((b - 1) * b) as f64).sqrt()
    } else {
        f64::NAN
    };
    let max_factor = (1.0 - 2.0 * model.p).powi(-2 * n_a as i32);
    let mut flags = Vec::new();
    if value > 1.0 {
        flags.push("out_of_bounds".to_string());
    }
    if value < 2f64.powi(-(n_a as i32)) {
        flags.push("below_floor".to_string());
    }
    Ok(PipelineEstimate { value, batches: b, stderr, max_factor, flags })
}

/// Inputs available to a mitigation strategy for one patch across the J grid.
#[derive(Debug, Clone)]
pub struct PatchSeries<'a> {
    pub patch: &'a Patch,
    /// Raw IPR curve (values and stderr) on the grid.
    pub raw: &'a DiagnosticCurve,
    /// Full-register samples per grid point, when the source was sampled.
    pub samples: Option<&'a [SampleSet]>,
    /// Hamming weight of the ideal output.
    pub weight: usize,
    /// Exact IPR at the LEC anchor, when known.
    pub exact_anchor: Option<f64>,
    pub batches: usize,
}

/// Mitigated curve plus per-point diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigatedSeries {
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub flags: Vec<Vec<String>>,
    /// Model parameters, e.g. fitted `p` per grid point or `R₀`.
    pub params: BTreeMap<String, Vec<f64>>,
}

/// A named post-processing strategy for raw IPR curves.
pub trait Mitigator: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether the strategy works point by point; otherwise it needs the
    /// whole curve.
    fn per_point(&self) -> bool {
        true
    }

    fn mitigate(&self, input: &PatchSeries<'_>) -> Result<MitigatedSeries>;
}

pub struct NoMitigation;

impl Mitigator for NoMitigation {
    fn name(&self) -> &'static str {
        "none"
    }

    fn mitigate(&self, input: &PatchSeries<'_>) -> Result<MitigatedSeries> {
        Ok(MitigatedSeries {
            values: input.raw.values.clone(),
            stderr: input.raw.stderr.clone(),
            flags: vec![Vec::new(); input.raw.len()],
            params: BTreeMap::new(),
        })
    }
}

fn fitted_models(input: &PatchSeries<'_>) -> Result<Vec<FlipModel>> {
    let sets = input.samples.ok_or_else(|| Error::param("Hamming-spread mitigation needs sampled data"))?;
    sets.iter()
        .map(|s| {
            let h: Vec<f64> = s.weight_histogram().iter().map(|&c| c as f64).collect();
            fit_pflip(&h, s.n(), input.weight)
        })
        .collect()
}

/// Rank-1 collision correction with `p` fitted per grid point.
pub struct HammingRank1;

impl Mitigator for HammingRank1 {
    fn name(&self) -> &'static str {
        "hamming"
    }

    fn mitigate(&self, input: &PatchSeries<'_>) -> Result<MitigatedSeries> {
        let models = fitted_models(input)?;
        let n_a = input.patch.len();
        let mut out = MitigatedSeries { values: Vec::new(), stderr: Vec::new(), flags: Vec::new(), params: BTreeMap::new() };
        for (i, m) in models.iter().enumerate() {
            let r = mitigate_collision_rank1(input.raw.values[i], m.p, n_a)?;
            out.values.push(r.value);
            out.stderr.push(input.raw.stderr[i] * r.factor);
            let mut flags = r.flags;
            if m.at_boundary {
                flags.push("fit_boundary".to_string());
            }
            out.flags.push(flags);
        }
        out.params.insert("p".into(), models.iter().map(|m| m.p).collect());
        out.params.insert("residual".into(), models.iter().map(|m| m.residual).collect());
        Ok(out)
    }
}

/// Per-Z-string inflation in the Parseval form, `p` fitted per grid point.
pub struct ParsevalHamming;

impl Mitigator for ParsevalHamming {
    fn name(&self) -> &'static str {
        "parseval-hamming"
    }

    fn mitigate(&self, input: &PatchSeries<'_>) -> Result<MitigatedSeries> {
        let models = fitted_models(input)?;
        let sets = input.samples.unwrap_or_default();
        let mut out = MitigatedSeries { values: Vec::new(), stderr: Vec::new(), flags: Vec::new(), params: BTreeMap::new() };
        for (set, m) in sets.iter().zip(&models) {
            let r = mitigate_parseval_pipeline_batched(set, input.patch, m, input.batches)?;
            out.values.push(r.value);
            out.stderr.push(r.stderr);
            let mut flags = r.flags;
            if m.at_boundary {
                flags.push("fit_boundary".to_string());
            }
            out.flags.push(flags);
        }
        out.params.insert("p".into(), models.iter().map(|m| m.p).collect());
        Ok(out)
    }
}

/// Low Entanglement Calibration anchored at `j0`, optionally with a
/// precomputed global ratio.
pub struct Lec {
    pub j0: f64,
    pub global: Option<LecCalibration>,
}

impl Mitigator for Lec {
    fn name(&self) -> &'static str {
        "lec"
    }

    fn per_point(&self) -> bool {
        false
    }

    fn mitigate(&self, input: &PatchSeries<'_>) -> Result<MitigatedSeries> {
        let n_a = input.patch.len();
        let cal = match self.global {
            Some(c) => c,
            None => {
                let exact = input.exact_anchor.ok_or_else(|| Error::Calibration("LEC needs the exact anchor value".into()))?;
                lec_calibrate(input.raw, exact, n_a, self.j0)?
            }
        };
        let curve = lec_apply(input.raw, cal, n_a)?;
        let flags = curve.values.iter().map(|&v| if v > 1.0 { vec!["out_of_bounds".to_string()] } else { Vec::new() }).collect();
        Ok(MitigatedSeries {
            values: curve.values,
            stderr: curve.stderr,
            flags,
            params: BTreeMap::from([("r0".to_string(), vec![cal.r0]), ("j0".to_string(), vec![cal.j0])]),
        })
    }
}

type MitigatorFactory = Box<dyn Fn(&MitigationOptions) -> Box<dyn Mitigator> + Send + Sync>;

/// Construction options shared by the built-in strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MitigationOptions {
    pub lec_anchor: f64,
    pub lec_global: Option<LecCalibration>,
}

impl Default for MitigationOptions {
    fn default() -> Self {
        MitigationOptions { lec_anchor: DEFAULT_LEC_ANCHOR, lec_global: None }
    }
}

/// Strategies selectable by name.
pub struct MitigatorRegistry {
    factories: BTreeMap<&'static str, MitigatorFactory>,
}

impl MitigatorRegistry {
    pub fn empty() -> Self {
        MitigatorRegistry { factories: BTreeMap::new() }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register("none", |_| Box::new(NoMitigation));
        r.register("hamming", |_| Box::new(HammingRank1));
        r.register("parseval-hamming", |_| Box::new(ParsevalHamming));
        r.register("lec", |o| Box::new(Lec { j0: o.lec_anchor, global: o.lec_global }));
        r
    }

    pub fn register(
        &mut self,
        name: &'static str,
        factory: impl Fn(&MitigationOptions) -> Box<dyn Mitigator> + Send + Sync + 'static,
    ) {
        self.factories.insert(name, Box::new(factory));
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn create(&self, name: &str, options: &MitigationOptions) -> Result<Box<dyn Mitigator>> {
        self.factories.get(name).map(|f| f(options)).ok_or_else(|| {
            Error::param(format!("unknown mitigation mode `{name}` (available: {})", self.names().join(" | ")))
        })
    }
}

/// One row of a mitigation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub patch: String,
    pub j: f64,
    pub raw: f64,
    pub mitigated: f64,
    pub stderr: f64,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MitigationReport {
    pub mode: String,
    pub params: BTreeMap<String, f64>,
    pub rows: Vec<ReportRow>,
}

impl MitigationReport {
    pub fn write_tsv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# mode {}", self.mode)?;
        for (k, v) in &self.params {
            writeln!(w, "# {k} {v:?}")?;
        }
        writeln!(w, "patch\tJ_over_pi\traw\tmitigated\tstderr\tflags")?;
        for r in &self.rows {
            let flags = if r.flags.is_empty() { "-".to_string() } else { r.flags.join(",") };
            writeln!(
                w,
                "{}\t{:?}\t{:?}\t{:?}\t{:?}\t{flags}",
                r.patch,
                r.j / std::f64::consts::PI,
                r.raw,
                r.mitigated,
                r.stderr
            )?;
        }
        Ok(())
    }
}
