use std::f64::consts::PI;
use std::sync::Arc;

use ffr_core::basis::{
    coeff_l2_distance, enumerate_ball, enumerate_kappa_ball, project, reconstruct, select_truncation, BasisIndexSet,
    CoefficientVector, FunctionObservation, MultiIndex, SobolevSpec,
};
use ffr_core::rng;
use proptest::prelude::*;

fn phi(j: u32, u: f64) -> f64 {
    if j == 0 {
        1.0
    } else {
        2f64.sqrt() * (PI * j as f64 * u).cos()
    }
}

fn target(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().enumerate().map(|(j, c)| c * phi(j as u32, u)).sum()
}

fn uniform_points(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, 0);
    (0..n).map(|_| rng::uniform(&mut r)).collect()
}

#[test]
fn kappa_ball_small_example() {
    let spec = SobolevSpec::new(vec![2.0], vec![1.0], 1.0).unwrap();
    let set = enumerate_kappa_ball(&spec, 3.0).unwrap();
    assert_eq!(set.indices(), &[MultiIndex::new(vec![0]), MultiIndex::new(vec![1])]);
}

#[test]
fn cardinality_grows_like_t_to_the_d() {
    for d in 1..=2usize {
        let spec = SobolevSpec::isotropic(d, 1.0).unwrap();
        let small = enumerate_kappa_ball(&spec, 16.0).unwrap().len() as f64;
        let large = enumerate_kappa_ball(&spec, 32.0).unwrap().len() as f64;
        let expected = 2f64.powi(d as i32);
        let ratio = large / small;
        assert!(
            ratio >= 0.7 * expected && ratio <= 1.3 * expected,
            "d={d}: ratio {ratio}"
        );
    }
}

#[test]
fn monte_carlo_coefficient_of_phi_1() {
    let n = 100_000;
    // Standard error sqrt(E[phi_1^4]) / sqrt(n), with E[phi_1^4] = 4 * 3/8 = 1.5.
    let se = 1.5f64.sqrt() / (n as f64).sqrt();
    assert!(4.0 * se < 0.02, "tolerance should cover four standard errors, se {se}");
    let u = uniform_points(n, 11);
    let y: Vec<f64> = u.iter().map(|&x| phi(1, x)).collect();
    let obs = FunctionObservation::noisy_1d(u, y).unwrap();
    let only_one = Arc::new(BasisIndexSet::from_indices(1, vec![MultiIndex::new(vec![1])]).unwrap());
    let c = project(&obs, &only_one).unwrap().coefficients()[0];
    assert!((c - 1.0).abs() < 0.02, "{c}");
}

#[test]
fn projection_is_unbiased() {
    let truth = [0.4, 1.0, -0.5, 0.25, 0.1];
    let set = Arc::new(enumerate_ball(1, 3.0).unwrap());
    // True coefficients by midpoint quadrature, independent of `project`.
    let m = 10_000;
    let exact: Vec<f64> = (0..4u32)
        .map(|j| {
            (0..m)
                .map(|i| (i as f64 + 0.5) / m as f64)
                .map(|u| target(&truth, u) * phi(j, u))
                .sum::<f64>()
                / m as f64
        })
        .collect();
    let reps = 500;
    let n = 40;
    let mut draws = vec![Vec::new(); 4];
    for rep in 0..reps {
        let u = uniform_points(n, 1000 + rep as u64);
        let y = u.iter().map(|&x| target(&truth, x)).collect();
        let c = project(&FunctionObservation::noisy_1d(u, y).unwrap(), &set).unwrap();
        for (d, &v) in draws.iter_mut().zip(c.coefficients()) {
            d.push(v);
        }
    }
    for (j, d) in draws.iter().enumerate() {
        let mean = d.iter().sum::<f64>() / reps as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!(
            (mean - exact[j]).abs() <= 3.0 * se,
            "index {j}: mean {mean}, exact {}, se {se}",
            exact[j]
        );
    }
}

#[test]
fn distance_matches_quadrature_of_reconstructions() {
    let set = Arc::new(enumerate_ball(1, 3.0).unwrap());
    let mut r = rng::stream(5, 1);
    for _ in 0..10 {
        let a: Vec<f64> = (0..4).map(|_| 2.0 * rng::uniform(&mut r) - 1.0).collect();
        let b: Vec<f64> = (0..4).map(|_| 2.0 * rng::uniform(&mut r) - 1.0).collect();
        let m = 10_000;
        let quad = (0..m)
            .map(|i| (i as f64 + 0.5) / m as f64)
            .map(|u| (target(&a, u) - target(&b, u)).powi(2))
            .sum::<f64>()
            / m as f64;
        let ca = CoefficientVector::new(Arc::clone(&set), a).unwrap();
        let cb = CoefficientVector::new(Arc::clone(&set), b).unwrap();
        let dist = coeff_l2_distance(&ca, &cb).unwrap();
        assert!((dist - quad.sqrt()).abs() < 1e-6, "{dist} vs {}", quad.sqrt());
    }
}

#[test]
fn truncation_picks_one_for_noiseless_phi_1() {
    let u = uniform_points(10_000, 3);
    let y = u.iter().map(|&x| phi(1, x)).collect();
    let obs = FunctionObservation::noisy_1d(u, y).unwrap();
    assert_eq!(select_truncation(&obs, &[0.0, 1.0], 5).unwrap(), 1.0);
}

#[test]
fn truncation_grows_with_sample_size() {
    let truth: Vec<f64> = (0..200).map(|j| 1.0 / (1.0 + (j * j) as f64)).collect();
    let candidates: Vec<f64> = (0..=30).map(f64::from).collect();
    let mut medians = Vec::new();
    for n in [100, 1000, 10_000] {
        let mut chosen: Vec<f64> = (0..20u64)
            .map(|seed| {
                let u = uniform_points(n, 77 + seed);
                let mut noise = rng::Gaussian::new(rng::stream(77 + seed, 9));
                let y = u.iter().map(|&x| target(&truth, x) + 0.1 * noise.sample()).collect();
                select_truncation(&FunctionObservation::noisy_1d(u, y).unwrap(), &candidates, 5).unwrap()
            })
            .collect();
        chosen.sort_by(f64::total_cmp);
        medians.push((chosen[9] + chosen[10]) / 2.0);
    }
    assert!(medians.windows(2).all(|w| w[0] <= w[1]), "{medians:?}");
}

#[test]
fn reconstruct_of_projection_recovers_low_order_function() {
    let set = Arc::new(enumerate_ball(1, 2.0).unwrap());
    let m = 4096;
    let u: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
    let truth = [1.0, -0.5, 0.25];
    let y = u.iter().map(|&x| target(&truth, x)).collect();
    let c = project(&FunctionObservation::noisy_1d(u, y).unwrap(), &set).unwrap();
    for x in [0.0, 0.3, 0.77, 1.0] {
        assert!((reconstruct(&c, &[x]).unwrap() - target(&truth, x)).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn distance_is_a_metric(
        a in prop::collection::vec(-5.0f64..5.0, 6),
        b in prop::collection::vec(-5.0f64..5.0, 6),
        c in prop::collection::vec(-5.0f64..5.0, 6),
    ) {
        let set = Arc::new(enumerate_ball(2, 2.0).unwrap());
        prop_assume!(set.len() == 6);
        let v = |x: Vec<f64>| CoefficientVector::new(Arc::clone(&set), x).unwrap();
        let (a, b, c) = (v(a), v(b), v(c));
        let ab = coeff_l2_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, coeff_l2_distance(&b, &a).unwrap());
        prop_assert_eq!(coeff_l2_distance(&a, &a).unwrap(), 0.0);
        let ac = coeff_l2_distance(&a, &c).unwrap();
        let cb = coeff_l2_distance(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }
}
