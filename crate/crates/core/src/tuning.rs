//! Hyperparameter selection.
//!
//! * Index sets: each of the first `min(N, 50)` instances picks its own
//!   truncation radius by held-out cross-validation; `U` and `V` are the balls
//!   at the average radius.
//! * Triple-basis `(sigma, lambda)` and smoother bandwidth: one seeded 80/20
//!   split of the training set, scored by output-coefficient squared error.
//!   Ties keep the earlier grid point.

use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::baseline::LseModel;
use crate::basis::{self, BasisIndexSet};
use crate::dataset::{ObservationPair, ProjectedDataset};
use crate::error::{Error, Result};
use crate::features::RksFeatureMap;
use crate::regress::{self, Model3BE, TrainingSummary};
use crate::rng;

pub const DEFAULT_SUBSET: usize = 50;
/// Multiples of the median pairwise input distance.
pub const SIGMA_FACTORS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
/// Multiples of the mean diagonal of `Z^T Z`.
pub const RIDGE_FACTORS: [f64; 5] = [1e-8, 1e-6, 1e-4, 1e-2, 1.0];
/// Multiples of the median pairwise input distance.
pub const BANDWIDTH_FACTORS: [f64; 7] = [0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5];

/// Averages per-instance cross-validated radii over the first `subset`
/// pairs; returns `(input radius, output radius)`.
pub fn select_index_radii(
    pairs: &[ObservationPair],
    candidates: &[f64],
    folds: usize,
    subset: usize,
) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let count = pairs.len().min(subset.max(1));
    let mut sum_in = 0.0;
    let mut sum_out = 0.0;
    for p in &pairs[..count] {
        sum_in += basis::select_truncation(&p.input, candidates, folds)?;
        sum_out += basis::select_truncation(&p.output, candidates, folds)?;
    }
    Ok((sum_in / count as f64, sum_out / count as f64))
}

/// Integer candidate radii `0, 1, ..., max`.
pub fn integer_radii(max: usize) -> Vec<f64> {
    (0..=max).map(|t| t as f64).collect()
}

/// Median Euclidean distance over pairs drawn from the first `limit` inputs.
pub fn median_input_distance(data: &ProjectedDataset, limit: usize) -> f64 {
    let m = data.len().min(limit);
    let mut d = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            d.push(basis::l2_distance(data.input_row(i), data.input_row(j)));
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let med = d[d.len() / 2];
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Seeded 80/20 split of `0..n`; returns `(train, validation)` positions.
pub fn holdout_split(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, 0));
    if n < 2 {
        return (order, Vec::new());
    }
    let cut = (((n as f64) * 0.8).round() as usize).clamp(1, n - 1);
    let validation = order.split_off(cut);
    (order, validation)
}

fn squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeBeChoice {
    pub sigma: f64,
    pub lambda: f64,
    pub score: f64,
}

/// Grid search over `(sigma, lambda)` with absolute values. Candidates whose
/// solve is refused as ill-conditioned are skipped.
pub fn tune_three_be(
    data: &ProjectedDataset,
    feature_count: usize,
    seed: u64,
    sigmas: &[f64],
    lambdas: &[f64],
) -> Result<ThreeBeChoice> {
    tune_three_be_with(data, feature_count, seed, sigmas, |_| lambdas.to_vec())
}

/// As [`tune_three_be`], with the lambda grid computed from each sigma's
/// training summary.
pub fn tune_three_be_with(
    data: &ProjectedDataset,
    feature_count: usize,
    seed: u64,
    sigmas: &[f64],
    lambdas_for: impl Fn(&TrainingSummary) -> Vec<f64>,
) -> Result<ThreeBeChoice> {
    if data.len() < 2 {
        return Err(Error::invalid("hyperparameter search needs at least 2 instances"));
    }
    if sigmas.is_empty() {
        return Err(Error::invalid("empty sigma grid"));
    }
    let (train_pos, valid_pos) = holdout_split(data.len(), rng::derive(seed, 0x5917));
    let train = data.select(&train_pos);
    let valid = data.select(&valid_pos);
    let mut best: Option<ThreeBeChoice> = None;
    for &sigma in sigmas {
        let map = RksFeatureMap::sample(data.input_set().len(), feature_count, sigma, seed)?;
        let summary = TrainingSummary::from_projected(&train, &map)?;
        for lambda in lambdas_for(&summary) {
            let psi = match regress::solve(&summary, lambda) {
                Ok(psi) => psi,
                Err(Error::IllConditioned { .. }) => continue,
                Err(e) => return Err(e),
            };
            let model = Model3BE::new(
                Arc::clone(data.input_set()),
                Arc::clone(data.output_set()),
                map.clone(),
                psi,
                lambda,
                train.len(),
            )?;
            let mut score = 0.0;
            for i in 0..valid.len() {
                let pred = model.predict_from_coeffs(valid.input_row(i))?;
                score += squared_error(&pred, valid.output_row(i));
            }
            score /= valid.len() as f64;
            if best.map_or(true, |b| score < b.score) {
                best = Some(ThreeBeChoice { sigma, lambda, score });
            }
        }
    }
    best.ok_or_else(|| Error::invalid("every (sigma, lambda) candidate was ill-conditioned"))
}

/// `factors * mean(diag(Z^T Z))`.
pub fn relative_ridge_grid(summary: &TrainingSummary, factors: &[f64]) -> Vec<f64> {
    let d = summary.feature_count().max(1);
    let scale = summary.gram().diagonal().sum() / d as f64;
    let scale = if scale > 0.0 { scale } else { 1.0 };
    factors.iter().map(|f| f * scale).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandwidthChoice {
    pub bandwidth: f64,
    pub score: f64,
}

/// Grid search over the smoother bandwidth on the same kind of split.
pub fn tune_lse(data: &ProjectedDataset, seed: u64, bandwidths: &[f64]) -> Result<BandwidthChoice> {
    if data.len() < 2 {
        return Err(Error::invalid("bandwidth search needs at least 2 instances"));
    }
    if bandwidths.is_empty() {
        return Err(Error::invalid("empty bandwidth grid"));
    }
    let (train_pos, valid_pos) = holdout_split(data.len(), rng::derive(seed, 0x5917));
    let train = data.select(&train_pos);
    let valid = data.select(&valid_pos);
    let mut best: Option<BandwidthChoice> = None;
    let base = LseModel::new(train, bandwidths[0])?;
    for &h in bandwidths {
        let model = base.with_bandwidth(h)?;
        let mut score = 0.0;
        for i in 0..valid.len() {
            let pred = model.predict_from_coeffs(valid.input_row(i))?;
            score += squared_error(&pred, valid.output_row(i));
        }
        score /= valid.len() as f64;
        if best.map_or(true, |b| score < b.score) {
            best = Some(BandwidthChoice { bandwidth: h, score });
        }
    }
    Ok(best.expect("non-empty grid"))
}

/// Euclidean ball of the given radius as a shared index set.
pub fn ball(dimension: usize, radius: f64) -> Result<Arc<BasisIndexSet>> {
    Ok(Arc::new(basis::enumerate_ball(dimension, radius)?))
}
