//! Acceptance suite. Runs every criterion in sequence (timing is sensitive to
//! concurrent work), prints one PASS/FAIL line each, then fails if any
//! criterion failed.

use std::sync::Arc;
use std::time::Instant;

use ffr_core::baseline::LseModel;
use ffr_core::basis::{self, enumerate_ball, BasisIndexSet, CoefficientVector, FunctionObservation, MultiIndex};
use ffr_core::bench::{self, BenchmarkConfig, SeriesTask, SyntheticTask, TaskConfig};
use ffr_core::dataset::ProjectedDataset;
use ffr_core::eval::median;
use ffr_core::features::RksFeatureMap;
use ffr_core::regress::{self, TrainingSummary};
use ffr_core::rng::{self, Gaussian};
use ffr_core::{persist, tuning};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn phi(j: u32, u: f64) -> f64 {
    if j == 0 {
        1.0
    } else {
        std::f64::consts::SQRT_2 * (std::f64::consts::PI * j as f64 * u).cos()
    }
}

fn phi_multi(alpha: &MultiIndex, x: &[f64]) -> f64 {
    alpha.entries().iter().zip(x).map(|(&j, &u)| phi(j, u)).product()
}

// --- 1 -----------------------------------------------------------------------

fn basis_correctness() -> Verdict {
    let mut worst_ortho = 0.0f64;
    let mut worst_parseval = 0.0f64;
    for d in [1usize, 2] {
        let set = Arc::new(enumerate_ball(d, 5.0).unwrap());
        // 10^4 nodes: trapezoid on [0,1] for d = 1, 100 x 100 midpoint grid for d = 2.
        let nodes: Vec<(Vec<f64>, f64)> = if d == 1 {
            let m = 10_000;
            (0..m)
                .map(|i| {
                    let w = if i == 0 || i == m - 1 { 0.5 } else { 1.0 } / (m - 1) as f64;
                    (vec![i as f64 / (m - 1) as f64], w)
                })
                .collect()
        } else {
            let m = 100;
            (0..m * m)
                .map(|i| {
                    let x = vec![((i / m) as f64 + 0.5) / m as f64, ((i % m) as f64 + 0.5) / m as f64];
                    (x, 1.0 / (m * m) as f64)
                })
                .collect()
        };
        let values: Vec<Vec<f64>> = nodes
            .iter()
            .map(|(x, _)| set.indices().iter().map(|a| basis::eval_basis(a, x).unwrap()).collect())
            .collect();
        // the library's evaluation agrees with the closed form
        for ((x, _), row) in nodes.iter().zip(&values).step_by(97) {
            for (a, v) in set.indices().iter().zip(row) {
                worst_ortho = worst_ortho.max((v - phi_multi(a, x)).abs());
            }
        }
        for p in 0..set.len() {
            for q in 0..set.len() {
                let ip: f64 = nodes.iter().zip(&values).map(|((_, w), row)| w * row[p] * row[q]).sum();
                let target = if p == q { 1.0 } else { 0.0 };
                worst_ortho = worst_ortho.max((ip - target).abs());
            }
        }
        let mut g = Gaussian::new(rng::stream(100 + d as u64, 0));
        for _ in 0..10 {
            let a = CoefficientVector::new(set.clone(), (0..set.len()).map(|_| g.sample()).collect()).unwrap();
            let b = CoefficientVector::new(set.clone(), (0..set.len()).map(|_| g.sample()).collect()).unwrap();
            let coeff = basis::coeff_l2_distance(&a, &b).unwrap();
            let func: f64 = nodes
                .iter()
                .map(|(x, w)| {
                    let diff = basis::reconstruct(&a, x).unwrap() - basis::reconstruct(&b, x).unwrap();
                    w * diff * diff
                })
                .sum::<f64>()
                .sqrt();
            worst_parseval = worst_parseval.max((coeff - func).abs());
        }
    }
    verdict(
        worst_ortho < 1e-6 && worst_parseval < 1e-6,
        format!("max orthonormality error {worst_ortho:.2e}, max Parseval gap {worst_parseval:.2e} (tol 1e-6)"),
    )
}

// --- 2 -----------------------------------------------------------------------

const TRUTH_TERMS: u32 = 200;

fn target_coeff(j: u32) -> f64 {
    1.0 / (1.0 + (j as f64).powi(2))
}

fn projection_error(n: usize, seed: u64) -> f64 {
    let truth_set = Arc::new(enumerate_ball(1, TRUTH_TERMS as f64).unwrap());
    let truth = CoefficientVector::new(truth_set.clone(), (0..=TRUTH_TERMS).map(target_coeff).collect()).unwrap();
    let mut r = rng::stream(seed, 0);
    let points: Vec<f64> = (0..n).map(|_| rng::uniform(&mut r)).collect();
    let mut g = Gaussian::new(r);
    let mut eval = basis::BasisEvaluator::new(&truth_set);
    let mut row = vec![0.0; truth_set.len()];
    let values: Vec<f64> = points
        .iter()
        .map(|&u| {
            eval.eval_into(&[u], &mut row);
            row.iter().zip(truth.coefficients()).map(|(p, c)| p * c).sum::<f64>() + 0.1 * g.sample()
        })
        .collect();
    let obs = FunctionObservation::noisy_1d(points, values).unwrap();
    let t = basis::rate_radius(n, 1.0, 1.0);
    let est = basis::project(&obs, &Arc::new(enumerate_ball(1, t).unwrap())).unwrap();
    // Parseval against the truncated truth
    let mut err = 0.0;
    for j in 0..=TRUTH_TERMS {
        let a = target_coeff(j);
        let e = est.coefficients().get(j as usize).copied().unwrap_or(0.0);
        err += (e - a) * (e - a);
    }
    err
}

fn projection_rate() -> Verdict {
    let sizes = [100usize, 1_000, 10_000, 100_000];
    let medians: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let mut errs: Vec<f64> = (0..20).map(|s| projection_error(n, 7_000 + s)).collect();
            median(&mut errs)
        })
        .collect();
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let slope = log_slope(&xs, &medians);
    verdict(
        (-0.9..=-0.45).contains(&slope),
        format!("slope {slope:.3} in [-0.9, -0.45]; median errors {}", sci(&medians)),
    )
}

// --- 3 -----------------------------------------------------------------------

fn kernel_max_deviation(features: usize, seed: u64) -> f64 {
    let s = 10;
    let sigma = 1.0;
    let map = RksFeatureMap::sample(s, features, sigma, seed).unwrap();
    let mut g = Gaussian::new(rng::stream(seed, 99));
    let scale = sigma / (s as f64).sqrt();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..s).map(|_| scale * g.sample()).collect();
        let y: Vec<f64> = (0..s).map(|_| scale * g.sample()).collect();
        let zx = map.compute(&x).unwrap();
        let zy = map.compute(&y).unwrap();
        let approx: f64 = zx.iter().zip(&zy).map(|(a, b)| a * b).sum();
        let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        let exact = (-d2 / (2.0 * sigma * sigma)).exp();
        worst = worst.max((approx - exact).abs());
    }
    worst
}

fn kernel_approximation() -> Verdict {
    let mut medians = Vec::new();
    let mut worst_at_5000 = 0.0f64;
    for features in [500usize, 5_000, 50_000] {
        let mut devs: Vec<f64> = (0..10).map(|seed| kernel_max_deviation(features, 300 + seed)).collect();
        if features == 5_000 {
            worst_at_5000 = devs.iter().copied().fold(0.0, f64::max);
        }
        medians.push(median(&mut devs));
    }
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    verdict(
        worst_at_5000 < 0.05 && decreasing,
        format!(
            "max deviation at D=5000 over 10 seeds {worst_at_5000:.4} (< 0.05); medians over D=500/5000/50000 {medians:.4?} strictly decreasing: {decreasing}"
        ),
    )
}

// --- 4 -----------------------------------------------------------------------

/// Least squares by Householder QR of `[Z | A]`, independent of the library.
fn qr_least_squares(z: &[Vec<f64>], a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = z.len();
    let n = z[0].len();
    let k = a[0].len();
    let mut r: Vec<Vec<f64>> = z
        .iter()
        .zip(a)
        .map(|(zr, ar)| zr.iter().chain(ar).copied().collect())
        .collect();
    for col in 0..n {
        let norm: f64 = (col..m).map(|i| r[i][col] * r[i][col]).sum::<f64>().sqrt();
        let alpha = if r[col][col] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (col..m).map(|i| r[i][col]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in col..n + k {
            let dot: f64 = (col..m).map(|i| v[i - col] * r[i][j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in col..m {
                r[i][j] -= f * v[i - col];
            }
        }
    }
    let mut x = vec![vec![0.0; k]; n];
    for out in 0..k {
        for i in (0..n).rev() {
            let mut s = r[i][n + out];
            for j in i + 1..n {
                s -= r[i][j] * x[j][out];
            }
            x[i][out] = s / r[i][i];
        }
    }
    x
}

fn relative_gap(a: &nalgebra::DMatrix<f64>, b: &[Vec<f64>]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, row) in b.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            num += (a[(i, j)] - v).powi(2);
            den += v * v;
        }
    }
    (num / den).sqrt()
}

fn solver_oracle() -> Verdict {
    let mut worst_ols = 0.0f64;
    let mut worst_ridge = 0.0f64;
    for p in 0..20u64 {
        let (m, n, k) = (120 + 10 * p as usize, 25 + p as usize, 4);
        let mut g = Gaussian::new(rng::stream(4_000 + p, 0));
        let z: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| g.sample()).collect()).collect();
        let a: Vec<Vec<f64>> = (0..m).map(|_| (0..k).map(|_| g.sample()).collect()).collect();
        let gram = nalgebra::DMatrix::from_fn(n, n, |i, j| (0..m).map(|r| z[r][i] * z[r][j]).sum());
        let cross = nalgebra::DMatrix::from_fn(n, k, |i, j| (0..m).map(|r| z[r][i] * a[r][j]).sum());
        let summary = TrainingSummary::from_parts(gram, cross, m).unwrap();
        let oracle = qr_least_squares(&z, &a);
        let ols = regress::solve(&summary, 0.0).unwrap();
        worst_ols = worst_ols.max(relative_gap(&ols, &oracle));
        let ridge = regress::solve(&summary, 1e-6).unwrap();
        let ols_rows: Vec<Vec<f64>> = (0..n).map(|i| (0..k).map(|j| ols[(i, j)]).collect()).collect();
        worst_ridge = worst_ridge.max(relative_gap(&ridge, &ols_rows));
    }
    verdict(
        worst_ols < 1e-8 && worst_ridge < 1e-4,
        format!("max relative gap to QR oracle {worst_ols:.2e} (< 1e-8); ridge 1e-6 vs OLS {worst_ridge:.2e} (< 1e-4)"),
    )
}

// --- 5 -----------------------------------------------------------------------

fn synthetic_config(train: usize, seed: u64, methods: &[&str]) -> BenchmarkConfig {
    let mut task = SyntheticTask::new(train);
    task.points_per_function = 100;
    task.anchors = 25;
    task.mapping_sigma = 1.0;
    task.test_count = 200;
    let mut config = BenchmarkConfig::new(TaskConfig::Synthetic(task), seed);
    config.methods = methods.iter().map(|m| m.to_string()).collect();
    config
}

fn end_to_end_learning() -> Verdict {
    let sizes = [200usize, 1_000, 5_000];
    let mut medians = Vec::new();
    let mut mean_at_largest = 0.0;
    for &n in &sizes {
        let mut mses = Vec::new();
        let mut means = Vec::new();
        for seed in 0..10 {
            let report = bench::run_benchmark(&synthetic_config(n, 500 + seed, &["3be", "mean"])).unwrap();
            mses.push(report.record(bench::Method::ThreeBe).unwrap().mse);
            means.push(report.record(bench::Method::Mean).unwrap().mse);
        }
        medians.push(median(&mut mses));
        mean_at_largest = median(&mut means);
    }
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let ratio = medians[2] / mean_at_largest;
    verdict(
        decreasing && ratio <= 0.25,
        format!(
            "median MSE at N=200/1000/5000 {} strictly decreasing: {decreasing}; N=5000 MSE / mean-predictor MSE {ratio:.3} (<= 0.25)",
            sci(&medians)
        ),
    )
}

// --- 6 -----------------------------------------------------------------------

fn scaling_claim() -> Verdict {
    // Both methods use the harness's cross-validation protocol; only the
    // sizes are fixed.
    let mpt = |train: usize| {
        let mut config = synthetic_config(train, 6_006, &["3be", "lse"]);
        if let TaskConfig::Synthetic(task) = &mut config.task {
            task.test_count = 100;
        }
        config.radius_in = Some(19.0);
        config.radius_out = Some(19.0);
        config.features = Some(1_000);
        config.quadrature_points = 64;
        let report = bench::run_benchmark(&config).unwrap();
        let three_be = report.record(bench::Method::ThreeBe).unwrap();
        let lse = report.record(bench::Method::Lse).unwrap();
        (
            three_be.mpt_seconds,
            lse.mpt_seconds,
            three_be.s,
            lse.hyperparameters.bandwidth.unwrap(),
        )
    };
    // This VM drifts between speed regimes lasting seconds, which can land on
    // one size and not the other. Alternate the sizes over three rounds and
    // take the median time per size.
    let rounds: Vec<_> = (0..3).map(|_| (mpt(1_000), mpt(10_000))).collect();
    let median = |f: &dyn Fn(&((f64, f64, usize, f64), (f64, f64, usize, f64))) -> f64| {
        let mut v: Vec<f64> = rounds.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v[1]
    };
    let t3_small = median(&|r| r.0 .0);
    let tl_small = median(&|r| r.0 .1);
    let t3_large = median(&|r| r.1 .0);
    let tl_large = median(&|r| r.1 .1);
    let (s, h) = (rounds[0].0 .2, rounds[0].1 .3);
    let r3 = t3_large / t3_small;
    let rl = tl_large / tl_small;
    let cross = tl_large / t3_large;
    verdict(
        r3 <= 1.5 && rl >= 5.0 && cross >= 10.0,
        format!(
            "s=r={s} D=1000: 3BE MPT {t3_small:.2e}s -> {t3_large:.2e}s (ratio {r3:.2}, <= 1.5); LSE {tl_small:.2e}s -> {tl_large:.2e}s (ratio {rl:.2}, >= 5, bandwidth {h:.3}); LSE/3BE at N=1e4 {cross:.1} (>= 10)"
        ),
    )
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

// --- 7 -----------------------------------------------------------------------

fn lse_contract() -> Verdict {
    let set: Arc<BasisIndexSet> = tuning::ball(1, 3.0).unwrap();
    let out: Arc<BasisIndexSet> = tuning::ball(1, 2.0).unwrap();
    let mut g = Gaussian::new(rng::stream(77, 0));
    let n = 200;
    let inputs: Vec<f64> = (0..n * set.len()).map(|_| g.sample()).collect();
    let outputs: Vec<f64> = (0..n * out.len()).map(|_| g.sample()).collect();
    let data = ProjectedDataset::from_rows(set.clone(), out.clone(), inputs, outputs).unwrap();
    let model = LseModel::new(data.clone(), 1.5).unwrap();

    let mut worst_sum = 0.0f64;
    let mut all_nonneg = true;
    for _ in 0..100 {
        let q: Vec<f64> = (0..set.len()).map(|_| g.sample()).collect();
        if let Some(w) = model.weights(&q).unwrap() {
            worst_sum = worst_sum.max((w.iter().sum::<f64>() - 1.0).abs());
            all_nonneg &= w.iter().all(|&x| x >= 0.0);
        }
    }
    let far = vec![1e3; set.len()];
    let zero = model.predict_from_coeffs(&far).unwrap().iter().all(|&c| c == 0.0);

    // isolated training input: shrink the bandwidth below its nearest-neighbour distance
    let i = 17;
    let nearest = (0..n)
        .filter(|&j| j != i)
        .map(|j| distance(data.input_row(i), data.input_row(j)))
        .fold(f64::INFINITY, f64::min);
    let isolated = LseModel::new(data.clone(), 0.9 * nearest).unwrap();
    let exact = isolated.predict_from_coeffs(data.input_row(i)).unwrap() == data.output_row(i);
    verdict(
        worst_sum < 1e-12 && all_nonneg && zero && exact,
        format!("weight sum error {worst_sum:.1e} (< 1e-12), non-negative {all_nonneg}; out-of-support zero {zero}; isolated input recovered exactly {exact}"),
    )
}

// --- 8 -----------------------------------------------------------------------

fn determinism_and_serialization() -> Verdict {
    let config = synthetic_config(400, 88, &["3be", "lse", "mean"]);
    let first = bench::run_benchmark_detailed(&config).unwrap();
    let second = bench::run_benchmark_detailed(&config).unwrap();
    let a = first.three_be.as_ref().unwrap();
    let b = second.three_be.as_ref().unwrap();
    let refit_identical = a
        .psi()
        .iter()
        .zip(b.psi().iter())
        .all(|(x, y)| x.to_bits() == y.to_bits())
        && a.feature_map().frequencies() == b.feature_map().frequencies();
    let mse_identical = first
        .report
        .records
        .iter()
        .zip(&second.report.records)
        .all(|(x, y)| x.mse.to_bits() == y.mse.to_bits());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    persist::save_model(a, &path).unwrap();
    let loaded = persist::load_model(&path).unwrap();
    let mut round_trip = true;
    let mut loaded_predictions = Vec::new();
    for x in &first.evaluation.inputs {
        let p = a.predict_coeffs(x).unwrap();
        let q = loaded.predict_coeffs(x).unwrap();
        round_trip &= p
            .coefficients()
            .iter()
            .zip(q.coefficients())
            .all(|(u, v)| u.to_bits() == v.to_bits());
        loaded_predictions.push(q);
    }
    let recomputed = first.evaluation.mse(&loaded_predictions, &first.quadrature).unwrap();
    let reported = first.report.record(bench::Method::ThreeBe).unwrap().mse;
    let mse_gap = (recomputed - reported).abs();

    let reparsed = ffr_core::BenchmarkReport::from_json(&first.report.to_json().unwrap()).unwrap();
    let rerun = bench::run_benchmark(&reparsed.config).unwrap();
    let from_recorded = rerun
        .records
        .iter()
        .zip(&reparsed.records)
        .all(|(x, y)| x.mse.to_bits() == y.mse.to_bits());
    verdict(
        refit_identical && mse_identical && round_trip && mse_gap <= 1e-12 && from_recorded,
        format!(
            "refit bitwise {refit_identical}; repeated MSE bitwise {mse_identical}; save/load predictions bitwise {round_trip}; MSE from saved model gap {mse_gap:.1e} (<= 1e-12); rerun from recorded config {from_recorded}"
        ),
    )
}

// --- 9 -----------------------------------------------------------------------

fn forward_prediction() -> Verdict {
    let w = 64;
    let mut g = Gaussian::new(rng::stream(909, 0));
    let values: Vec<f64> = (0..w * 300)
        .map(|i| {
            let t = i as f64;
            (t * std::f64::consts::TAU / 150.0).sin()
                + 0.5 * (t * std::f64::consts::TAU / 47.0).sin()
                + 0.25 * (t * std::f64::consts::TAU / 19.0).cos()
                + 0.05 * g.sample()
        })
        .collect();
    let task = SeriesTask {
        path: None,
        values: Some(values),
        window_length: w,
        stride: None,
        train_fraction: 0.85,
    };
    let mut config = BenchmarkConfig::new(TaskConfig::Series(task), 9);
    config.methods = vec!["3be".into(), "mean".into()];
    let report = bench::run_benchmark(&config).unwrap();
    let mse = report.record(bench::Method::ThreeBe).unwrap().mse;
    let mean = report.record(bench::Method::Mean).unwrap().mse;
    let variance = report.output_variance;
    verdict(
        mse < variance && mse < mean,
        format!("3BE test MSE {mse:.4e} vs held-out variance {variance:.4e} and mean-predictor MSE {mean:.4e} (R^2 = {:.3})", 1.0 - mse / variance),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("basis correctness", basis_correctness),
        ("projection rate", projection_rate),
        ("kernel approximation", kernel_approximation),
        ("solver oracle equivalence", solver_oracle),
        ("end-to-end learning", end_to_end_learning),
        ("scaling claim", scaling_claim),
        ("smoother contract", lse_contract),
        ("determinism and serialization", determinism_and_serialization),
        ("forward prediction", forward_prediction),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {} {name} ({:.1}s): {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            v.detail
        );
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
