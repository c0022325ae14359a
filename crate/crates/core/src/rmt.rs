//! Random-matrix reference values, Porter–Thomas and gap-ratio statistics,
//! and Monte-Carlo Haar samplers used to validate the closed forms.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::SectorBasis;
use crate::density::reduced_density;
use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::samples::Patch;
use crate::state::{marginal_distribution, SectorState};

/// `⟨r⟩` for uncorrelated levels, `2 ln 2 − 1`.
pub const POISSON_MEAN_R: f64 = 0.386_294_361_119_890_6;
/// `⟨r⟩` for the circular unitary ensemble at large dimension.
pub const CUE_MEAN_R: f64 = 0.5996;

/// Average purity of a `d_A`-dimensional subsystem of a Haar-random pure state.
pub fn page_purity(d_a: u64, d_b: u64) -> f64 {
    page_from_dims(d_a as f64, d_b as f64)
}

fn page_from_dims(a: f64, b: f64) -> f64 {
    (a + b) / (a * b + 1.0)
}

/// Average Z-basis collision probability of a Haar-random state on `d_A`.
pub fn haar_marginal_ipr(d_a: u64, d_b: u64) -> f64 {
    haar_ipr_from_dims(d_a as f64, d_b as f64)
}

fn haar_ipr_from_dims(a: f64, b: f64) -> f64 {
    (1.0 + b) / (a * b + 1.0)
}

fn big_binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for t in 0..k {
        acc = acc * BigUint::from(n - t) / BigUint::from(t + 1);
    }
    acc
}

fn ratio(num: &BigUint, den: &BigUint) -> f64 {
    // scale both to keep the conversion inside f64 range
    let shift = num.bits().max(den.bits()).saturating_sub(1000);
    (num >> shift).to_f64().unwrap_or(f64::NAN) / (den >> shift).to_f64().unwrap_or(f64::NAN)
}

struct SectorSplit {
    /// `(d_{A,h}, d_{B,k−h})` for every admissible `h`.
    terms: Vec<(BigUint, BigUint)>,
    d_k: BigUint,
}

fn sector_split(n_a: u64, n_b: u64, k: u64) -> Result<SectorSplit> {
    if k > n_a + n_b {
        return Err(Error::param(format!("weight {k} exceeds n_A + n_B = {}", n_a + n_b)));
    }
    let terms = (k.saturating_sub(n_b)..=k.min(n_a))
        .map(|h| (big_binomial(n_a, h), big_binomial(n_b, k - h)))
        .collect();
    Ok(SectorSplit { terms, d_k: big_binomial(n_a + n_b, k) })
}

/// Average purity of `n_A` qubits for a Haar-random state of the weight-`k` sector.
pub fn u1_haar_purity(n_a: u64, n_b: u64, k: u64) -> Result<f64> {
    let s = sector_split(n_a, n_b, k)?;
    let num: BigUint = s.terms.iter().map(|(a, b)| a * a * b + a * b * b).sum();
    Ok(ratio(&num, &(&s.d_k * (&s.d_k + 1u32))))
}

/// Average marginal collision probability for a Haar-random sector state.
pub fn u1_haar_marginal_ipr(n_a: u64, n_b: u64, k: u64) -> Result<f64> {
    let s = sector_split(n_a, n_b, k)?;
    let num: BigUint = s.terms.iter().map(|(a, b)| a * b * (b + 1u32)).sum();
    Ok(ratio(&num, &(&s.d_k * (&s.d_k + 1u32))))
}

/// Marginal collision probability of the maximally mixed sector state.
pub fn mixed_sector_ipr(n_a: u64, n_b: u64, k: u64) -> Result<f64> {
    let s = sector_split(n_a, n_b, k)?;
    let num: BigUint = s.terms.iter().map(|(a, b)| a * b * b).sum();
    Ok(ratio(&num, &(&s.d_k * &s.d_k)))
}

/// All reference values for one bipartition and sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarRefs {
    pub n_a: u64,
    pub n_b: u64,
    pub k: u64,
    pub page_purity: f64,
    pub haar_marginal_ipr: f64,
    pub u1_purity: f64,
    pub u1_marginal_ipr: f64,
    pub mixed_sector_ipr: f64,
}

impl HaarRefs {
    pub fn compute(n_a: u64, n_b: u64, k: u64) -> Result<Self> {
        let (d_a, d_b) = (2f64.powi(n_a as i32), 2f64.powi(n_b as i32));
        Ok(HaarRefs {
            n_a,
            n_b,
            k,
            page_purity: page_from_dims(d_a, d_b),
            haar_marginal_ipr: haar_ipr_from_dims(d_a, d_b),
            u1_purity: u1_haar_purity(n_a, n_b, k)?,
            u1_marginal_ipr: u1_haar_marginal_ipr(n_a, n_b, k)?,
            mixed_sector_ipr: mixed_sector_ipr(n_a, n_b, k)?,
        })
    }
}

pub const REFS_TABLE_HEADER: &str = "n_A\tn_B\tk\tpage\thaar_ipr\tu1_purity\tu1_ipr\tmixed";

/// Writes reference rows as tab-separated text with a header line.
pub fn write_refs_table(w: &mut impl Write, rows: &[HaarRefs]) -> Result<()> {
    writeln!(w, "{REFS_TABLE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}",
            r.n_a, r.n_b, r.k, r.page_purity, r.haar_marginal_ipr, r.u1_purity, r.u1_marginal_ipr, r.mixed_sector_ipr
        )?;
    }
    Ok(())
}

/// Density of one outcome probability of a Haar state in dimension `D`.
pub fn porter_thomas_pdf(p: f64, d: u64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return 0.0;
    }
    let d = d as f64;
    (d - 1.0) * (1.0 - p).powf(d - 2.0)
}

/// Kolmogorov–Smirnov distance between the empirical law of `D·p` and `Exp(1)`.
pub fn porter_thomas_ks(probabilities: &[f64], d: u64) -> Result<f64> {
    if d < 2 || probabilities.is_empty() {
        return Err(Error::param("Porter-Thomas test needs D >= 2 and at least one probability"));
    }
    let mut x: Vec<f64> = probabilities.iter().map(|&p| p * d as f64).collect();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    Ok(x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = 1.0 - (-v).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max))
}

/// Spacing ratios of a set of eigenphases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRatioStats {
    pub ratios: Vec<f64>,
    pub mean: f64,
    pub wrap: bool,
}

const DEGENERATE_SPACING: f64 = 1e-12;

impl GapRatioStats {
    /// Normalized histogram on `[0, 1]`: `(bin centre, density)`.
    pub fn histogram(&self, bins: usize) -> Vec<(f64, f64)> {
        histogram_density(&self.ratios, bins, 0.0, 1.0)
    }
}

/// Gap ratios `min(s_n, s_{n−1}) / max(s_n, s_{n−1})` from sorted phases.
///
/// With `wrap`, the spacing `θ_1 + 2π − θ_D` closes the circle and every
/// phase contributes one ratio.
pub fn gap_ratios(phases: &[f64], wrap: bool) -> Result<GapRatioStats> {
    if phases.len() < 3 {
        return Err(Error::param(format!("gap ratios need at least 3 phases, got {}", phases.len())));
    }
    let mut p = phases.to_vec();
    p.sort_by(f64::total_cmp);
    let mut s: Vec<f64> = p.windows(2).map(|w| w[1] - w[0]).collect();
    if wrap {
        s.push(p[0] + TAU - p[p.len() - 1]);
    }
    let pair = |a: f64, b: f64| {
        let (a, b) = (if a < DEGENERATE_SPACING { 0.0 } else { a }, if b < DEGENERATE_SPACING { 0.0 } else { b });
        match (a == 0.0, b == 0.0) {
            (true, true) => 1.0,
            _ => a.min(b) / a.max(b),
        }
    };
    let ratios: Vec<f64> = if wrap {
        (0..s.len()).map(|i| pair(s[i], s[(i + 1) % s.len()])).collect()
    } else {
        s.windows(2).map(|w| pair(w[0], w[1])).collect()
    };
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok(GapRatioStats { ratios, mean, wrap })
}

pub fn poisson_r_pdf(r: f64) -> f64 {
    2.0 / (1.0 + r).powi(2)
}

/// Wigner-surmise density of `r` for the unitary class.
pub fn cue_r_pdf(r: f64) -> f64 {
    81.0 * 3f64.sqrt() / (2.0 * PI) * (r + r * r).powi(2) / (1.0 + r + r * r).powi(4)
}

/// Normalized histogram over `[lo, hi)`; values outside are dropped.
pub fn histogram_density(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        if v >= lo && v <= hi {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let total = values.len().max(1) as f64;
    counts
        .iter()
        .enumerate()
        .map(|(b, &c)| (lo + (b as f64 + 0.5) * width, c as f64 / (total * width)))
        .collect()
}

/// Normalized complex-Gaussian vector of length `dim`.
pub fn haar_vector(dim: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let mut v: Vec<Complex64> =
        (0..dim).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

/// Haar-random `d × d` unitary: QR of a Ginibre matrix with the phases of
/// `R`'s diagonal moved into `Q`.
pub fn haar_unitary(d: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let z = DMatrix::from_fn(d, d, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for c in 0..d {
        let rc = r[(c, c)];
        let phase = if rc.norm() > 0.0 { rc / rc.norm() } else { Complex64::new(1.0, 0.0) };
        for x in q.column_mut(c).iter_mut() {
            *x *= phase;
        }
    }
    q
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        MeanSe { mean, stderr: (var / n).sqrt() }
    }

    /// `|x − mean|` in units of the standard error.
    pub fn z_score(&self, x: f64) -> f64 {
        (x - self.mean).abs() / self.stderr
    }
}

/// Monte-Carlo purity and marginal IPR of `d_A` in Haar states on `d_A·d_B`.
pub fn mc_haar_moments(d_a: usize, d_b: usize, trials: usize, seed: u64) -> (MeanSe, MeanSe) {
    let per: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, Domain::MonteCarlo, 1, t as u64);
            let v = haar_vector(d_a * d_b, &mut rng);
            let m = DMatrix::from_row_slice(d_a, d_b, &v);
            let rho = &m * m.adjoint();
            let purity = rho.iter().map(|z| z.norm_sqr()).sum();
            let ipr = (0..d_a).map(|a| rho[(a, a)].re.powi(2)).sum();
            (purity, ipr)
        })
        .collect();
    let (p, i): (Vec<f64>, Vec<f64>) = per.into_iter().unzip();
    (MeanSe::of(&p), MeanSe::of(&i))
}

/// Monte-Carlo purity and marginal IPR of the first `n_A` qubits for
/// Haar states of the weight-`k` sector of `n_A + n_B` qubits.
pub fn mc_u1_moments(n_a: usize, n_b: usize, k: usize, trials: usize, seed: u64) -> Result<(MeanSe, MeanSe)> {
    let n = n_a + n_b;
    let basis = Arc::new(SectorBasis::new(n, k, 1 << 22)?);
    let patch = Patch::from_qubits((0..n_a).collect(), n)?;
    let per: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = SectorState::haar_random(basis.clone(), rng::realization_seed(seed, t as u64));
            let purity = reduced_density(&s, &patch).map(|r| r.purity()).unwrap_or(f64::NAN);
            let ipr = marginal_distribution(&s, patch.qubits()).iter().map(|p| p * p).sum();
            (purity, ipr)
        })
        .collect();
    let (p, i): (Vec<f64>, Vec<f64>) = per.into_iter().unzip();
    Ok((MeanSe::of(&p), MeanSe::of(&i)))
}

/// i.i.d. uniform phases on the circle.
pub fn poisson_phases(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>() * TAU).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn closed_forms() {
        assert!((page_purity(2, 2) - 0.8).abs() < 1e-15);
        assert_eq!(page_purity(7, 1), 1.0);
        assert!((haar_marginal_ipr(2, 2) - 0.6).abs() < 1e-15);
        assert!((haar_marginal_ipr(16, 1) - 2.0 / 17.0).abs() < 1e-15);
    }

    #[test]
    fn two_dim_sector_values() {
        assert!((u1_haar_purity(1, 1, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((u1_haar_marginal_ipr(1, 1, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((mixed_sector_ipr(1, 1, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!(u1_haar_purity(1, 1, 3).is_err());
    }

    #[test]
    fn empty_environment_collapses() {
        for n_a in 1..=10u64 {
            for k in 0..=n_a {
                let dk = big_binomial(n_a, k).to_f64().unwrap();
                assert!((u1_haar_marginal_ipr(n_a, 0, k).unwrap() - 2.0 / (dk + 1.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn large_systems_stay_finite() {
        let r = HaarRefs::compute(9, 72, 40).unwrap();
        assert!(r.u1_marginal_ipr > 1.0 / 512.0 && r.u1_marginal_ipr < 1.0);
        assert!(u1_haar_purity(50, 50, 50).unwrap().is_finite());
    }

    #[test]
    fn bounds_and_ordering_on_grid() {
        for n in 2..=14u64 {
            for n_a in 1..n {
                let n_b = n - n_a;
                for k in 0..=n {
                    let r = HaarRefs::compute(n_a, n_b, k).unwrap();
                    let lo = 1.0 / (1u64 << n_a) as f64 - 1e-15;
                    for v in [r.page_purity, r.haar_marginal_ipr, r.u1_purity, r.u1_marginal_ipr, r.mixed_sector_ipr] {
                        assert!(v >= lo && v <= 1.0 + 1e-15, "{r:?}");
                    }
                    assert!(r.mixed_sector_ipr <= r.u1_marginal_ipr + 1e-15);
                }
            }
        }
    }

    #[test]
    fn haar_mixed_gap_positive_and_shrinking() {
        // half filling, n_A = 2, growing environment
        let mut last = f64::INFINITY;
        for n_b in (2..=18u64).step_by(2) {
            let k = (2 + n_b) / 2;
            let gap = u1_haar_marginal_ipr(2, n_b, k).unwrap() - mixed_sector_ipr(2, n_b, k).unwrap();
            assert!(gap > 0.0);
            assert!(gap < last);
            last = gap;
        }
    }

    #[test]
    fn u1_ipr_non_increasing_in_environment() {
        for n_a in 1..=4u64 {
            let mut last = f64::INFINITY;
            for n_b in (2..=20 - n_a).step_by(2) {
                let v = u1_haar_marginal_ipr(n_a, n_b, (n_a + n_b) / 2).unwrap();
                assert!(v <= last + 1e-15);
                last = v;
            }
        }
    }

    #[test]
    fn reference_densities_integrate_to_one() {
        assert!((simpson(poisson_r_pdf, 0.0, 1.0, 2000) - 1.0).abs() < 1e-8);
        assert!((simpson(cue_r_pdf, 0.0, 1.0, 2000) - 1.0).abs() < 1e-8);
        assert!((simpson(|p| porter_thomas_pdf(p, 50), 0.0, 1.0, 20000) - 1.0).abs() < 1e-8);
        assert_eq!(porter_thomas_pdf(0.0, 17), 16.0);
    }

    #[test]
    fn equally_spaced_phases_give_unit_ratios() {
        let phases: Vec<f64> = (0..10).map(|i| i as f64 * TAU / 10.0).collect();
        let s = gap_ratios(&phases, true).unwrap();
        assert_eq!(s.ratios.len(), 10);
        assert!((s.mean - 1.0).abs() < 1e-12);
        assert_eq!(gap_ratios(&phases, false).unwrap().ratios.len(), 8);
        assert!(gap_ratios(&[0.0, 1.0], true).is_err());
    }

    #[test]
    fn degenerate_spacings() {
        let s = gap_ratios(&[0.0, 0.0, 0.0, 1.0], false).unwrap();
        assert_eq!(s.ratios, vec![1.0, 0.0]);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = rng::stream(1, Domain::MonteCarlo, 0, 0);
        let u = haar_unitary(20, &mut rng);
        let err = (u.adjoint() * &u - DMatrix::identity(20, 20)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn monte_carlo_matches_page_and_ipr() {
        let (p, i) = mc_haar_moments(8, 8, 10_000, 3);
        assert!(p.z_score(page_purity(8, 8)) < 3.0);
        assert!(i.z_score(haar_marginal_ipr(8, 8)) < 3.0);
        let (_, i4) = mc_haar_moments(4, 4, 10_000, 4);
        assert!(i4.z_score(haar_marginal_ipr(4, 4)) < 3.0);
    }

    #[test]
    fn monte_carlo_matches_sector_formulas() {
        let (p, i) = mc_u1_moments(3, 5, 4, 4000, 9).unwrap();
        assert!(p.z_score(u1_haar_purity(3, 5, 4).unwrap()) < 3.0);
        assert!(i.z_score(u1_haar_marginal_ipr(3, 5, 4).unwrap()) < 3.0);
        let (p2, i2) = mc_u1_moments(1, 1, 1, 4000, 10).unwrap();
        assert!(p2.z_score(2.0 / 3.0) < 3.0);
        assert!(i2.z_score(2.0 / 3.0) < 3.0);
    }

    #[test]
    fn sector_haar_state_is_porter_thomas() {
        let basis = Arc::new(SectorBasis::new(16, 8, 20_000).unwrap());
        let s = SectorState::haar_random(basis, 21);
        let ks = porter_thomas_ks(&s.probabilities(), 12870).unwrap();
        assert!(ks < 0.01, "ks {ks}");
    }
}
