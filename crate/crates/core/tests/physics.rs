use std::collections::BTreeMap;
use std::f64::consts::PI;

use hfloquet::circuit::disorder_angle;
use hfloquet::density::reduced_density;
use hfloquet::estimators::{collision_estimate, cumulant_truncated_moment, z_expectations};
use hfloquet::mitigation::{apply_bitflip_channel, mitigate_z_string};
use hfloquet::rmt::MeanSe;
use hfloquet::rng::{self, Domain};
use hfloquet::state::marginal_distribution;
use hfloquet::{EdgeLayer, FloquetCircuit, LatticeSpec, Patch, PatchShape, SampleSet, SectorState};
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn evolved(lat: &LatticeSpec, j_over_pi: f64, n_f: usize, seed: u64) -> SectorState {
    let c = FloquetCircuit::build(lat, j_over_pi * PI, n_f, seed).unwrap();
    let mut s = SectorState::neel(lat).unwrap();
    s.evolve(&c).unwrap();
    s
}

fn chi_square_p(observed: &[f64], expected: &[f64]) -> f64 {
    let stat: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    1.0 - ChiSquared::new((observed.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn disorder_fields_are_uniform() {
    let lat = LatticeSpec::new(10, 10).unwrap();
    let bins = 20;
    let mut counts = vec![0.0; bins];
    let mut total = 0.0;
    for seed in 0..100 {
        let c = FloquetCircuit::build(&lat, 0.1 * PI, 1, seed).unwrap();
        for g in c.cycle() {
            for h in [g.h_i, g.h_j] {
                assert!((-PI / 2.0..=PI / 2.0).contains(&h));
                counts[(((h + PI / 2.0) / PI * bins as f64) as usize).min(bins - 1)] += 1.0;
                total += 1.0;
            }
        }
    }
    let p = chi_square_p(&counts, &vec![total / bins as f64; bins]);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn disorder_is_addressable() {
    let a = disorder_angle(5, EdgeLayer::VerticalOdd, 3, 1);
    assert_eq!(a, disorder_angle(5, EdgeLayer::VerticalOdd, 3, 1));
    assert_ne!(a, disorder_angle(5, EdgeLayer::VerticalOdd, 3, 0));
    assert_ne!(a, disorder_angle(6, EdgeLayer::VerticalOdd, 3, 1));
}

#[test]
fn long_time_state_is_near_sector_haar() {
    let lat = LatticeSpec::new(3, 3).unwrap();
    let s = evolved(&lat, 0.14, 126, 17);
    let ipr: f64 = s.probabilities().iter().map(|p| p * p).sum();
    // Haar vector in a D-dim sector has E Σ p² = 2/(D+1)
    let reference = -(2.0 / 127.0f64).log2();
    assert!((-ipr.log2() - reference).abs() < 0.15, "S2 = {}, ref = {reference}", -ipr.log2());
}

#[test]
fn sampled_estimator_matches_exact_moment() {
    let lat = LatticeSpec::new(4, 4).unwrap();
    let s = evolved(&lat, 0.14, 4, 3);
    let patch = Patch::central(&lat, PatchShape::new(2, 2)).unwrap();
    let exact: f64 = marginal_distribution(&s, patch.qubits()).iter().map(|p| p * p).sum();
    let values: Vec<f64> = (0..200)
        .map(|b| collision_estimate(&s.sample(10_000, 500 + b).unwrap().restrict(&patch).unwrap(), 2).unwrap().value)
        .collect();
    let m = MeanSe::of(&values);
    assert!(m.z_score(exact).abs() < 3.0, "mean {} ± {} vs {exact}", m.mean, m.stderr);
}

#[test]
fn sample_frequencies_follow_probabilities() {
    let lat = LatticeSpec::new(3, 3).unwrap();
    let s = evolved(&lat, 0.1, 3, 8);
    let n_s = 200_000;
    let counts = s.sample(n_s, 4).unwrap().counts();
    let basis_probs = s.probabilities();
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    for (i, p) in basis_probs.iter().enumerate() {
        let word = s.basis().state(i) as u128;
        observed.push(*counts.get(&word).unwrap_or(&0) as f64);
        expected.push(p * n_s as f64);
    }
    let p = chi_square_p(&observed, &expected);
    assert!(p > 0.001, "p = {p}");
}

fn random_patch(lat: &LatticeSpec, rng: &mut impl Rng, max: (usize, usize)) -> Patch {
    let w = rng.random_range(1..=max.0);
    let h = rng.random_range(1..=max.1);
    Patch::rect(lat, PatchShape::new(w, h), rng.random_range(0..=lat.lx() - w), rng.random_range(0..=lat.ly() - h))
        .unwrap()
}

#[test]
fn purity_bounds_collision_moment_and_dephasing_relation() {
    let lat = LatticeSpec::new(4, 4).unwrap();
    for t in 0..100u64 {
        let mut rng = rng::stream(1, Domain::MonteCarlo, 30, t);
        let s = evolved(&lat, [0.01, 0.07, 0.14][(t % 3) as usize], 1 + (t % 3) as usize, t);
        let patch = random_patch(&lat, &mut rng, (3, 3));
        let rho = reduced_density(&s, &patch).unwrap();
        let ipr: f64 = marginal_distribution(&s, patch.qubits()).iter().map(|p| p * p).sum();
        assert!(rho.purity() >= ipr - 1e-10);
        assert!((rho.dephased().purity() - ipr).abs() < 1e-10);
    }
}

fn moments_of(p: &[f64], n_a: usize) -> BTreeMap<u64, f64> {
    let z = z_expectations(p);
    // mask bit i is patch qubit i; z is indexed MSB-first
    (1..1u64 << n_a)
        .map(|m| (m, z[(0..n_a).filter(|i| m >> i & 1 == 1).fold(0, |a, i| a | 1 << (n_a - 1 - i))]))
        .collect()
}

#[test]
fn cumulant_truncation_error_is_monotone() {
    let lat = LatticeSpec::new(4, 4).unwrap();
    let mut worst = vec![0.0f64; 7];
    for t in 0..20u64 {
        let s = evolved(&lat, 0.03 + 0.005 * t as f64, 2, 40 + t);
        let mut rng = rng::stream(2, Domain::MonteCarlo, 31, t);
        let (x, y) = (rng.random_range(0..=2), rng.random_range(0..=1));
        let patch = Patch::rect(&lat, PatchShape::new(2, 3), x, y).unwrap();
        let moments = moments_of(&marginal_distribution(&s, patch.qubits()), 6);
        for k in 1..=6 {
            let err = (cumulant_truncated_moment(&moments, 63, k).unwrap() - moments[&63]).abs();
            worst[k] = worst[k].max(err);
        }
    }
    assert!(worst[6] < 1e-12);
    for k in 1..6 {
        assert!(worst[k + 1] <= worst[k] + 1e-12, "{worst:?}");
    }
}

fn z_string(p: &[f64], mask: usize) -> f64 {
    p.iter().enumerate().map(|(x, q)| if (x & mask).count_ones() % 2 == 0 { *q } else { -*q }).sum()
}

#[test]
fn terminal_flips_are_inverted_exactly() {
    let mut rng = rng::stream(3, Domain::MonteCarlo, 32, 0);
    for n in 1..=4usize {
        let d = 1 << n;
        let mut p: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        let flip = 0.07f64;
        // push p through every flip pattern
        let mut q = vec![0.0; d];
        for (x, px) in p.iter().enumerate() {
            for e in 0..d {
                let k = e.count_ones() as i32;
                q[x ^ e] += px * flip.powi(k) * (1.0 - flip).powi(n as i32 - k);
            }
        }
        for mask in 1..d {
            let fixed = mitigate_z_string(z_string(&q, mask), flip, mask.count_ones() as usize).unwrap();
            assert!((fixed.value - z_string(&p, mask)).abs() < 1e-12);
        }
    }
}

#[test]
fn terminal_flips_are_inverted_on_samples() {
    let lat = LatticeSpec::new(4, 4).unwrap();
    let s = evolved(&lat, 0.05, 2, 9);
    let clean = s.sample(400_000, 1).unwrap();
    let noisy = apply_bitflip_channel(&clean, 0.03, 2).unwrap();
    let parity = |set: &SampleSet, mask: u128| {
        set.shots().iter().map(|x| if (x & mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 }).sum::<f64>()
            / set.len() as f64
    };
    for mask in [0b1u128 << 15, 0b11 << 14, 0b1001 << 3, 0xF0F] {
        let ideal = parity(&clean, mask);
        let fixed = mitigate_z_string(parity(&noisy, mask), 0.03, mask.count_ones() as usize).unwrap();
        let se = fixed.factor / (noisy.len() as f64).sqrt();
        assert!((fixed.value - ideal).abs() < 5.0 * se, "mask {mask:b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolution_conserves_norm_and_weight(j in 0.0f64..0.25, n_f in 1usize..4, seed in 0u64..1000) {
        let lat = LatticeSpec::new(3, 3).unwrap();
        let s = evolved(&lat, j, n_f, seed);
        let total: f64 = s.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(s.sample(50, seed).unwrap().shots().iter().all(|x| x.count_ones() == 4));
    }

    #[test]
    fn marginal_moment_is_between_floor_and_one(j in 0.0f64..0.25, seed in 0u64..1000, w in 1usize..3, h in 1usize..3) {
        let lat = LatticeSpec::new(3, 3).unwrap();
        let s = evolved(&lat, j, 2, seed);
        let patch = Patch::rect(&lat, PatchShape::new(w, h), 0, 0).unwrap();
        let ipr: f64 = marginal_distribution(&s, patch.qubits()).iter().map(|p| p * p).sum();
        prop_assert!(ipr >= 2f64.powi(-((w * h) as i32)) - 1e-12 && ipr <= 1.0 + 1e-12);
    }
}
