use std::f64::consts::PI;

use ffr_core::features::rbf_kernel;
use ffr_core::RksFeatureMap;
use nalgebra::DMatrix;
use proptest::prelude::*;

#[test]
fn single_zero_frequency_with_phase_pi() {
    let map = RksFeatureMap::from_parts(1.0, 0, DMatrix::zeros(1, 3), vec![PI]).unwrap();
    let z = map.compute(&[0.3, -2.0, 7.0]).unwrap();
    assert!((z[0] + 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn odd_feature_count_matches_direct_formula() {
    // 7 features leaves a partial vector lane; every entry must still follow
    // sqrt(2/D) cos(w.x + b).
    let map = RksFeatureMap::sample(3, 7, 0.8, 19).unwrap();
    let x = [0.2, -0.4, 1.1];
    let z = map.compute(&x).unwrap();
    let w = map.frequencies();
    for (i, &zi) in z.iter().enumerate() {
        let arg: f64 = (0..3).map(|j| w[(i, j)] * x[j]).sum::<f64>() + map.phases()[i];
        assert!((zi - (2.0 / 7.0f64).sqrt() * arg.cos()).abs() < 1e-14, "feature {i}");
    }
}

#[test]
fn bandwidth_two_approximates_wide_kernel() {
    // K(x, y) = exp(-|x - y|^2 / (2 sigma^2)); averaging over maps removes
    // most of the Monte Carlo error.
    let x = [0.5, 0.0];
    let y = [-1.0, 1.0];
    let r2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
    let expected = (-r2 / 8.0).exp();
    let approx = (0..10u64)
        .map(|seed| {
            let map = RksFeatureMap::sample(2, 20_000, 2.0, seed).unwrap();
            let (zx, zy) = (map.compute(&x).unwrap(), map.compute(&y).unwrap());
            zx.iter().zip(&zy).map(|(a, b)| a * b).sum::<f64>()
        })
        .sum::<f64>()
        / 10.0;
    assert!((approx - expected).abs() < 0.01, "{approx} vs {expected}");
    assert!((rbf_kernel(r2.sqrt(), 2.0) - expected).abs() < 1e-15);
}

proptest! {
    #[test]
    fn features_are_bounded_and_pure(
        x in prop::collection::vec(-50.0f64..50.0, 1..6),
        d in 1usize..300,
        bandwidth in 0.05f64..10.0,
        seed in any::<u64>(),
    ) {
        let map = RksFeatureMap::sample(x.len(), d, bandwidth, seed).unwrap();
        let z = map.compute(&x).unwrap();
        let bound = (2.0 / d as f64).sqrt();
        prop_assert!(z.iter().all(|v| v.abs() <= bound * (1.0 + 1e-15)));
        prop_assert!(z.iter().map(|v| v * v).sum::<f64>() <= 2.0 + 1e-12);
        prop_assert_eq!(z, map.compute(&x).unwrap());
    }
}
