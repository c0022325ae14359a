//! Collision-probability estimators, Parseval forms, cumulant truncation,
//! entropies and entropy-versus-coupling curves.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::density::ReducedDensity;
use crate::error::{Error, Result};
use crate::samples::{Patch, SampleSet};
use crate::state::{marginal_distribution, PureState};

/// Default number of contiguous shot blocks used for the standard error.
pub const DEFAULT_BATCHES: usize = 16;

/// Largest patch for which all `2^{n_A}` Z strings are enumerated.
pub const MAX_PARSEVAL_QUBITS: usize = 12;

/// Largest patch for the `4^{n_A}`-term Pauli sum.
pub const MAX_PAULI_QUBITS: usize = 8;

/// Logarithm base for entropies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyBase {
    #[default]
    Bits,
    Nats,
}

impl EntropyBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            EntropyBase::Bits => x.log2(),
            EntropyBase::Nats => x.ln(),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            EntropyBase::Bits => "bits",
            EntropyBase::Nats => "nats",
        }
    }
}

impl std::str::FromStr for EntropyBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bits" | "2" => Ok(EntropyBase::Bits),
            "nats" | "e" => Ok(EntropyBase::Nats),
            _ => Err(Error::param(format!("unknown entropy base `{s}` (bits | nats)"))),
        }
    }
}

/// How the error bar of a sampled moment is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StderrMode {
    /// Spread of the estimator over contiguous shot blocks.
    #[default]
    Batch,
    /// `value · sqrt(2^{n_A/2} / n_S)`.
    Analytic,
}

impl std::str::FromStr for StderrMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(StderrMode::Batch),
            "analytic" => Ok(StderrMode::Analytic),
            _ => Err(Error::param(format!("unknown stderr mode `{s}` (batch | analytic)"))),
        }
    }
}

/// Sampled estimate of `M_k = Σ_a p(a)^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub k: usize,
    /// Estimator over the whole sample set.
    pub value: f64,
    pub batches: usize,
    pub batch_mean: f64,
    /// Standard error of the batch mean; `NaN` with a single batch.
    pub batch_stderr: f64,
    pub analytic_stderr: f64,
    pub n_s: usize,
}

impl MomentEstimate {
    pub fn stderr(&self, mode: StderrMode) -> f64 {
        match mode {
            StderrMode::Batch => self.batch_stderr,
            StderrMode::Analytic => self.analytic_stderr,
        }
    }
}

/// Unbiased k-fold collision estimator `Σ_i C(n_i, k) / C(n_S, k)` on counts.
pub fn collision_from_counts<'a>(counts: impl IntoIterator<Item = &'a u64>, n_s: u64, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::param("collision order must be at least 1"));
    }
    if n_s < k as u64 {
        return Err(Error::param(format!("need at least {k} samples, have {n_s}")));
    }
    let ratio = |c: u64| -> f64 { (0..k as u64).map(|t| c.saturating_sub(t) as f64 / (n_s - t) as f64).product() };
    Ok(counts.into_iter().map(|&c| ratio(c)).sum())
}

fn collision_of_shots(shots: &[u128], k: usize) -> Result<f64> {
    let mut map: HashMap<u128, u64> = HashMap::new();
    for &s in shots {
        *map.entry(s).or_insert(0) += 1;
    }
    collision_from_counts(map.values(), shots.len() as u64, k)
}

/// `M̂_k` with the default batch count.
pub fn collision_estimate(samples: &SampleSet, k: usize) -> Result<MomentEstimate> {
    collision_estimate_batched(samples, k, DEFAULT_BATCHES)
}

/// `M̂_k` on the whole set plus mean and spread over `b` contiguous equal
/// blocks; trailing shots that do not fill a block are left out of the
/// batches. `b` is reduced when blocks would hold fewer than `k` shots.
pub fn collision_estimate_batched(samples: &SampleSet, k: usize, b: usize) -> Result<MomentEstimate> {
    if k < 2 {
        return Err(Error::param("collision order k must be at least 2"));
    }
    let shots = samples.shots();
    let value = collision_of_shots(shots, k)?;
    let b = b.clamp(1, (shots.len() / k).max(1));
    let size = shots.len() / b;
    let per: Vec<f64> = shots.chunks_exact(size).take(b).map(|c| collision_of_shots(c, k)).collect::<Result<_>>()?;
    let batch_mean = per.iter().sum::<f64>() / b as f64;
    let batch_stderr = if b > 1 {
        let var = per.iter().map(|v| (v - batch_mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        (var / b as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(MomentEstimate {
        k,
        value,
        batches: b,
        batch_mean,
        batch_stderr,
        analytic_stderr: value * sample_complexity(samples.n(), shots.len()),
        n_s: shots.len(),
    })
}

/// `Σ_a p(a)^k`.
pub fn moment_of_distribution(p: &[f64], k: usize) -> f64 {
    p.iter().map(|&x| x.powi(k as i32)).sum()
}

/// Exact marginal moment `Σ_a p_A(a)^k` of a pure state.
pub fn exact_marginal_moment(state: &dyn PureState, patch: &Patch, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::param("moment order k must be at least 2"));
    }
    if patch.len() > MAX_PARSEVAL_QUBITS + 8 {
        return Err(Error::resource("marginal patch qubits", patch.len() as u64, (MAX_PARSEVAL_QUBITS + 8) as u64));
    }
    patch.check_width(state.n())?;
    Ok(moment_of_distribution(&marginal_distribution(state, patch.qubits()), k))
}

/// `log(M_k) / (1 − k)` in the given base.
pub fn collision_entropy(value: f64, k: usize, base: EntropyBase) -> Result<f64> {
    if k < 2 {
        return Err(Error::param("entropy order k must be at least 2"));
    }
    if !(value > 0.0) {
        return Err(Error::param(format!("collision moment must be positive, got {value}")));
    }
    Ok(base.log(value) / (1.0 - k as f64))
}

/// In-place Walsh–Hadamard transform, `v[s] ← Σ_a (−1)^{s·a} v[a]`.
pub fn walsh_hadamard(v: &mut [f64]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// `⟨Z_s⟩` for every Z string `s` on a marginal distribution (bit order as `p`).
pub fn z_expectations(p: &[f64]) -> Vec<f64> {
    let mut z = p.to_vec();
    walsh_hadamard(&mut z);
    z
}

/// `2^{−n_A} Σ_s ⟨Z_s⟩²` computed from a distribution.
pub fn parseval_ipr_of_distribution(p: &[f64]) -> f64 {
    z_expectations(p).iter().map(|z| z * z).sum::<f64>() / p.len() as f64
}

pub fn parseval_ipr(state: &dyn PureState, patch: &Patch) -> Result<f64> {
    if patch.len() > MAX_PARSEVAL_QUBITS {
        return Err(Error::resource("Parseval patch qubits", patch.len() as u64, MAX_PARSEVAL_QUBITS as u64));
    }
    patch.check_width(state.n())?;
    Ok(parseval_ipr_of_distribution(&marginal_distribution(state, patch.qubits())))
}

/// `d_A^{−1} Σ_P ⟨P⟩²` over all `4^{n_A}` Pauli strings.
///
/// For an X-support `x`, `Tr(ρ X^x Z^z) = Σ_a (−1)^{z·a} ρ[a, a⊕x]`, so each
/// `x` costs one complex Walsh–Hadamard transform.
pub fn parseval_purity(rho: &ReducedDensity) -> Result<f64> {
    let n_a = rho.n_a();
    if n_a > MAX_PAULI_QUBITS {
        return Err(Error::resource("Pauli-sum patch qubits", n_a as u64, MAX_PAULI_QUBITS as u64));
    }
    let d = rho.dim();
    let m = rho.matrix();
    let mut total = 0.0;
    let (mut re, mut im) = (vec![0.0; d], vec![0.0; d]);
    for x in 0..d {
        for a in 0..d {
            let z = m[(a, a ^ x)];
            re[a] = z.re;
            im[a] = z.im;
        }
        walsh_hadamard(&mut re);
        walsh_hadamard(&mut im);
        total += re.iter().zip(&im).map(|(r, i)| r * r + i * i).sum::<f64>();
    }
    Ok(total / d as f64)
}

/// `−log Tr ρ²`.
pub fn renyi2_entropy(rho: &ReducedDensity, base: EntropyBase) -> f64 {
    -base.log(rho.purity())
}

/// Set partitions of `{0..n}` as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut a = vec![0usize; n];
    let mut max = vec![0usize; n];
    loop {
        out.push(a.clone());
        // rightmost position that can still grow
        let mut i = n - 1;
        loop {
            if i == 0 {
                return out;
            }
            if a[i] <= max[i - 1] {
                break;
            }
            i -= 1;
        }
        a[i] += 1;
        max[i] = max[i - 1].max(a[i]);
        for t in i + 1..n {
            a[t] = 0;
            max[t] = max[i];
        }
    }
}

fn blocks_of(rgs: &[usize], elements: &[u32]) -> Vec<u64> {
    let nblocks = rgs.iter().copied().max().map_or(0, |m| m + 1);
    let mut blocks = vec![0u64; nblocks];
    for (&b, &e) in rgs.iter().zip(elements) {
        blocks[b] |= 1 << e;
    }
    blocks
}

fn elements(mask: u64) -> Vec<u32> {
    (0..64).filter(|b| mask >> b & 1 == 1).collect()
}

/// Connected correlator of the Z string `mask` by Möbius inversion over set
/// partitions: `κ(B) = Σ_π (−1)^{|π|−1} (|π|−1)! Π_{b∈π} ⟨Z_b⟩`.
pub fn connected_correlator(moments: &BTreeMap<u64, f64>, mask: u64) -> Result<f64> {
    let el = elements(mask);
    let mut total = 0.0;
    for rgs in set_partitions(el.len()) {
        let blocks = blocks_of(&rgs, &el);
        let q = blocks.len();
        let weight = if q % 2 == 1 { 1.0 } else { -1.0 } * (1..q).map(|t| t as f64).product::<f64>();
        let mut prod = 1.0;
        for b in blocks {
            prod *= *moments.get(&b).ok_or_else(|| Error::param(format!("missing moment for Z string {b:#b}")))?;
        }
        total += weight * prod;
    }
    Ok(total)
}

/// Approximates `⟨Z_target⟩` from connected correlators of order `≤ k_trunc`.
///
/// `moments` maps Z-string masks (bit `i` = patch qubit `i`) to `⟨Z_s⟩`; every
/// nonempty subset of `target` with at most `k_trunc` elements is required.
pub fn cumulant_truncated_moment(moments: &BTreeMap<u64, f64>, target: u64, k_trunc: usize) -> Result<f64> {
    if k_trunc < 1 {
        return Err(Error::param("cumulant truncation order must be at least 1"));
    }
    let el = elements(target);
    let mut kappa: HashMap<u64, f64> = HashMap::new();
    let mut total = 0.0;
    for rgs in set_partitions(el.len()) {
        let blocks = blocks_of(&rgs, &el);
        if blocks.iter().any(|b| b.count_ones() as usize > k_trunc) {
            continue;
        }
        let mut prod = 1.0;
        for b in blocks {
            let k = match kappa.get(&b) {
                Some(&k) => k,
                None => {
                    let k = connected_correlator(moments, b)?;
                    kappa.insert(b, k);
                    k
                }
            };
            prod *= k;
        }
        total += prod;
    }
    Ok(total)
}

/// Multiplicative error scale `sqrt(2^{n_A/2} / n_S)` of `M̂_2`.
pub fn sample_complexity(n_a: usize, n_s: usize) -> f64 {
    (2f64.powf(n_a as f64 / 2.0) / n_s as f64).sqrt()
}

/// One observable as a function of the coupling, with its reference value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticCurve {
    pub system: String,
    pub patch: String,
    pub n_f: usize,
    pub seed: u64,
    pub base: EntropyBase,
    /// Couplings in radians, strictly increasing.
    pub j: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub reference: Option<f64>,
    pub epsilon: f64,
    pub jstar: Option<f64>,
}

/// Band half-width around the reference used for `J*`.
pub const DEFAULT_EPSILON: f64 = 0.1;

impl DiagnosticCurve {
    pub fn new(j: Vec<f64>, values: Vec<f64>, stderr: Vec<f64>) -> Result<Self> {
        if j.is_empty() || j.len() != values.len() || j.len() != stderr.len() {
            return Err(Error::param("curve needs matching, nonempty J / value / stderr columns"));
        }
        if j.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("curve J grid must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("curve values must be finite"));
        }
        Ok(DiagnosticCurve {
            system: String::new(),
            patch: String::new(),
            n_f: 0,
            seed: 0,
            base: EntropyBase::Bits,
            j,
            values,
            stderr,
            reference: None,
            epsilon: DEFAULT_EPSILON,
            jstar: None,
        })
    }

    /// Sets the reference and recomputes `J*`.
    pub fn with_reference(mut self, reference: f64, epsilon: f64) -> Self {
        self.reference = Some(reference);
        self.epsilon = epsilon;
        self.jstar = extract_jstar(&self, reference, epsilon);
        self
    }

    pub fn len(&self) -> usize {
        self.j.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j.is_empty()
    }

    pub fn in_band(&self, i: usize) -> Option<bool> {
        self.reference.map(|r| (self.values[i] - r).abs() <= self.epsilon)
    }

    /// Tab-separated export with `#` metadata lines.
    pub fn write_tsv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# system {}", self.system)?;
        writeln!(w, "# patch {}", self.patch)?;
        writeln!(w, "# n_f {}", self.n_f)?;
        writeln!(w, "# seed {}", self.seed)?;
        writeln!(w, "# base {}", self.base.tag())?;
        writeln!(w, "# epsilon {:?}", self.epsilon)?;
        match self.jstar {
            Some(js) => writeln!(w, "# jstar_over_pi {:?}", js / std::f64::consts::PI)?,
            None => writeln!(w, "# jstar_over_pi none")?,
        }
        writeln!(w, "{CURVE_HEADER}")?;
        for i in 0..self.len() {
            let reference = self.reference.map_or("nan".to_string(), |r| format!("{r:?}"));
            let band = self.in_band(i).map_or("nan", |b| if b { "1" } else { "0" });
            writeln!(
                w,
                "{:?}\t{:?}\t{:?}\t{reference}\t{band}",
                self.j[i] / std::f64::consts::PI,
                self.values[i],
                self.stderr[i]
            )?;
        }
        Ok(())
    }
}

pub const CURVE_HEADER: &str = "J_over_pi\tvalue\tstderr\treference\tin_band";

/// Smallest grid coupling whose value is within `epsilon` of `reference`.
pub fn extract_jstar(curve: &DiagnosticCurve, reference: f64, epsilon: f64) -> Option<f64> {
    curve.j.iter().zip(&curve.values).find(|(_, &v)| (v - reference).abs() <= epsilon).map(|(&j, _)| j)
}

/// Pointwise mean and standard error over curves on one grid.
pub fn spatial_average(curves: &[DiagnosticCurve]) -> Result<DiagnosticCurve> {
    let first = curves.first().ok_or_else(|| Error::param("spatial average needs at least one curve"))?;
    if curves.iter().any(|c| c.j != first.j) {
        return Err(Error::param("curves must share the same J grid"));
    }
    let m = curves.len() as f64;
    let mut values = Vec::with_capacity(first.len());
    let mut stderr = Vec::with_capacity(first.len());
    for i in 0..first.len() {
        if curves.len() == 1 {
            values.push(first.values[i]);
            stderr.push(first.stderr[i]);
            continue;
        }
        let mean = curves.iter().map(|c| c.values[i]).sum::<f64>() / m;
        let var = curves.iter().map(|c| (c.values[i] - mean).powi(2)).sum::<f64>() / (m - 1.0);
        values.push(mean);
        stderr.push((var / m).sqrt());
    }
    let mut out = DiagnosticCurve::new(first.j.clone(), values, stderr)?;
    out.system = first.system.clone();
    out.patch = first.patch.split('@').next().unwrap_or_default().to_string();
    out.n_f = first.n_f;
    out.seed = first.seed;
    out.base = first.base;
    out.epsilon = first.epsilon;
    Ok(match first.reference {
        Some(r) => out.with_reference(r, first.epsilon),
        None => out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::SectorBasis;
    use crate::density::reduced_density;
    use crate::state::{FullState, SectorState};
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use std::sync::Arc;

    #[test]
    fn small_collision_counts() {
        let set = SampleSet::from_shots(2, vec![1, 1, 2]).unwrap();
        let est = collision_estimate_batched(&set, 2, 1).unwrap();
        assert!((est.value - 1.0 / 3.0).abs() < 1e-15);
        let same = SampleSet::from_shots(3, vec![5; 40]).unwrap();
        for k in 2..=5 {
            assert_eq!(collision_estimate(&same, k).unwrap().value, 1.0);
        }
        assert!(collision_estimate(&set, 4).is_err());
        // n_S = k: single subset indicator
        assert_eq!(collision_estimate(&SampleSet::from_shots(2, vec![1, 2]).unwrap(), 2).unwrap().value, 0.0);
    }

    #[test]
    fn three_sample_average_is_unbiased() {
        let p = 0.3;
        let mut mean = 0.0;
        for t in 0..8u32 {
            let shots: Vec<u128> = (0..3).map(|b| u128::from(t >> b & 1)).collect();
            let prob: f64 = shots.iter().map(|&s| if s == 0 { p } else { 1.0 - p }).product();
            mean += prob * collision_estimate_batched(&SampleSet::from_shots(1, shots).unwrap(), 2, 1).unwrap().value;
        }
        assert!((mean - (p * p + (1.0 - p) * (1.0 - p))).abs() < 1e-15);
    }

    #[test]
    fn batches_are_contiguous_blocks() {
        let shots: Vec<u128> = (0..32).map(|i| if i < 16 { 0 } else { i as u128 }).collect();
        let set = SampleSet::from_shots(6, shots).unwrap();
        let est = collision_estimate_batched(&set, 2, 2).unwrap();
        assert_eq!(est.batches, 2);
        // first block all equal, second all distinct
        assert!((est.batch_mean - 0.5).abs() < 1e-15);
        assert!((est.batch_stderr - 0.5).abs() < 1e-15);
    }

    #[test]
    fn entropies() {
        assert_eq!(collision_entropy(1.0, 2, EntropyBase::Bits).unwrap(), 0.0);
        assert!((collision_entropy(1.0 / 16.0, 2, EntropyBase::Bits).unwrap() - 4.0).abs() < 1e-12);
        assert!((collision_entropy(16f64.powi(-2), 3, EntropyBase::Bits).unwrap() - 4.0).abs() < 1e-12);
        assert!(collision_entropy(0.0, 2, EntropyBase::Bits).is_err());
        let mixed = ReducedDensity::maximally_mixed(3);
        assert!((renyi2_entropy(&mixed, EntropyBase::Bits) - 3.0).abs() < 1e-12);
        assert!((renyi2_entropy(&mixed, EntropyBase::Nats) - 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn parseval_single_qubit_cases() {
        let zero = FullState::basis_state(1, 0).unwrap();
        let p = Patch::from_qubits(vec![0], 1).unwrap();
        assert!((parseval_ipr(&zero, &p).unwrap() - 1.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = FullState::from_amplitudes(1, vec![Complex64::new(h, 0.0); 2]).unwrap();
        assert!((parseval_ipr(&plus, &p).unwrap() - 0.5).abs() < 1e-15);
    }

    fn pauli(c: u8) -> DMatrix<Complex64> {
        let (o, z, i) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0));
        match c {
            0 => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
            1 => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            2 => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
            _ => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        }
    }

    #[test]
    fn pauli_sum_matches_explicit_pauli_traces() {
        let basis = Arc::new(SectorBasis::new(7, 3, 100).unwrap());
        let s = SectorState::haar_random(basis, 3);
        let rho = reduced_density(&s, &Patch::from_qubits(vec![1, 4, 6], 7).unwrap()).unwrap();
        let mut explicit = 0.0;
        for code in 0..64u32 {
            let mut p = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
            for t in 0..3 {
                p = p.kronecker(&pauli((code >> (2 * t) & 3) as u8));
            }
            explicit += (rho.matrix() * p).trace().norm_sqr();
        }
        explicit /= 8.0;
        assert!((parseval_purity(&rho).unwrap() - explicit).abs() < 1e-12);
        assert!((parseval_purity(&rho).unwrap() - rho.purity()).abs() < 1e-12);
        assert!((parseval_purity(&ReducedDensity::maximally_mixed(2)).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn set_partition_counts_are_bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147];
        for (n, &b) in bell.iter().enumerate() {
            assert_eq!(set_partitions(n).len(), b);
        }
    }

    fn moments_of(p: &[f64], n_a: usize) -> BTreeMap<u64, f64> {
        // z_expectations index bit (n_a−1−i) is patch qubit i; remap to bit i
        let z = z_expectations(p);
        (1..1u64 << n_a)
            .map(|m| {
                let idx = (0..n_a).filter(|i| m >> i & 1 == 1).fold(0usize, |acc, i| acc | 1 << (n_a - 1 - i));
                (m, z[idx])
            })
            .collect()
    }

    #[test]
    fn cumulant_full_order_and_product_states() {
        let basis = Arc::new(SectorBasis::new(8, 4, 100).unwrap());
        let s = SectorState::haar_random(basis, 5);
        let p = marginal_distribution(&s, &[0, 2, 3, 5]);
        let m = moments_of(&p, 4);
        for target in 1..16u64 {
            let k = target.count_ones() as usize;
            let approx = cumulant_truncated_moment(&m, target, k).unwrap();
            assert!((approx - m[&target]).abs() < 1e-12);
        }
        // product distribution
        let singles = [0.3, -0.6, 0.1];
        let mut prod = BTreeMap::new();
        for mask in 1..8u64 {
            prod.insert(mask, (0..3).filter(|i| mask >> i & 1 == 1).map(|i| singles[i]).product());
        }
        assert!((cumulant_truncated_moment(&prod, 7, 1).unwrap() - prod[&7]).abs() < 1e-15);
    }

    #[test]
    fn cumulant_bell_case_and_missing_input() {
        let m = BTreeMap::from([(1u64, 0.0), (2, 0.0), (3, 1.0)]);
        assert_eq!(cumulant_truncated_moment(&m, 3, 1).unwrap(), 0.0);
        assert_eq!(cumulant_truncated_moment(&m, 3, 2).unwrap(), 1.0);
        let partial = BTreeMap::from([(1u64, 0.0), (2, 0.0)]);
        assert!(cumulant_truncated_moment(&partial, 3, 2).is_err());
        assert!(cumulant_truncated_moment(&partial, 3, 1).is_ok());
    }

    #[test]
    fn table_of_error_scales() {
        let table = [(1, 0.01), (2, 0.01), (4, 0.02), (6, 0.03), (8, 0.04), (9, 0.05), (12, 0.08), (16, 0.16), (20, 0.32), (25, 0.76)];
        for (n_a, want) in table {
            assert!((sample_complexity(n_a, 10_000) - want).abs() <= 0.005 + 1e-12, "n_A {n_a}");
        }
    }

    #[test]
    fn jstar_and_curve_rules() {
        let j = vec![0.1, 0.2, 0.3, 0.4];
        let c = DiagnosticCurve::new(j.clone(), vec![0.0, 0.5, 0.95, 1.0], vec![0.0; 4]).unwrap();
        assert_eq!(extract_jstar(&c, 1.0, 0.1), Some(0.3));
        assert_eq!(extract_jstar(&c, 5.0, 0.1), None);
        let flat = DiagnosticCurve::new(j.clone(), vec![1.0; 4], vec![0.0; 4]).unwrap();
        assert_eq!(extract_jstar(&flat, 1.0, 0.1), Some(0.1));
        assert!(DiagnosticCurve::new(vec![0.2, 0.1], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(DiagnosticCurve::new(vec![0.1], vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn spatial_average_rules() {
        let c = DiagnosticCurve::new(vec![0.1, 0.2], vec![1.0, 2.0], vec![0.1, 0.1]).unwrap();
        assert_eq!(spatial_average(std::slice::from_ref(&c)).unwrap().values, c.values);
        let avg = spatial_average(&[c.clone(), c.clone(), c.clone()]).unwrap();
        assert_eq!(avg.stderr, vec![0.0, 0.0]);
        let other = DiagnosticCurve::new(vec![0.1, 0.3], vec![1.0, 2.0], vec![0.0; 2]).unwrap();
        assert!(spatial_average(&[c, other]).is_err());
        assert!(spatial_average(&[]).is_err());
    }

    #[test]
    fn curve_tsv_round_trips_numbers() {
        let c = DiagnosticCurve::new(vec![0.1 * std::f64::consts::PI, 0.5], vec![1.0 / 3.0, 2.5], vec![1e-17, 0.1])
            .unwrap()
            .with_reference(2.45, 0.1);
        let mut buf = Vec::new();
        c.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], CURVE_HEADER);
        let cols: Vec<f64> = rows[1].split('\t').map(|t| t.parse().unwrap()).collect();
        assert_eq!(cols[1], 1.0 / 3.0);
        assert_eq!(cols[2], 1e-17);
        assert!(rows[2].ends_with("\t1"));
    }
}
