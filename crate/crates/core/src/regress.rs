//! The triple-basis estimator.
//!
//! Input functions are reduced to projection coefficients over `U`, lifted
//! through a random kitchen sink map `z`, and linearly mapped to output
//! coefficients over `V`:
//!
//! ```text
//! f(P0) = Psi^T z(a_U(P0)),   Psi = (Z^T Z + lambda I)^-1 Z^T A
//! ```
//!
//! Training only ever holds the normal-equation products `Z^T Z` (D x D) and
//! `Z^T A` (D x r), accumulated in fixed-size shards so that memory does not
//! grow with the number of instances and results do not depend on the thread
//! count.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::{self, BasisIndexSet, CoefficientVector, FunctionObservation};
use crate::dataset::{ObservationPair, ProjectedDataset};
use crate::error::{Error, Result};
use crate::features::RksFeatureMap;

/// Above this condition estimate an unregularized solve is refused.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Above this condition estimate an unregularized solve switches from
/// Cholesky to a fully pivoted LU factorization.
pub const CONDITION_BORDERLINE: f64 = 1e8;

const BLOCK: usize = 256;
const SHARD: usize = 4096;

/// Running sums `Z^T Z`, `Z^T A` and the instance count.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSummary {
    gram: DMatrix<f64>,
    cross: DMatrix<f64>,
    count: usize,
}

impl TrainingSummary {
    pub fn new(feature_count: usize, output_len: usize) -> Self {
        TrainingSummary {
            gram: DMatrix::zeros(feature_count, feature_count),
            cross: DMatrix::zeros(feature_count, output_len),
            count: 0,
        }
    }

    pub fn from_parts(gram: DMatrix<f64>, cross: DMatrix<f64>, count: usize) -> Result<Self> {
        if !gram.is_square() || gram.nrows() != cross.nrows() {
            return Err(Error::invalid(format!(
                "gram is {}x{} but cross is {}x{}",
                gram.nrows(),
                gram.ncols(),
                cross.nrows(),
                cross.ncols()
            )));
        }
        Ok(TrainingSummary { gram, cross, count })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn cross(&self) -> &DMatrix<f64> {
        &self.cross
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn feature_count(&self) -> usize {
        self.gram.nrows()
    }

    pub fn output_len(&self) -> usize {
        self.cross.ncols()
    }

    /// Adds one instance: `gram += z z^T`, `cross += z a^T`.
    pub fn accumulate(
        &mut self,
        input: &CoefficientVector,
        output: &CoefficientVector,
        map: &RksFeatureMap,
    ) -> Result<()> {
        if map.feature_count() != self.feature_count() {
            return Err(Error::invalid(format!(
                "feature map has {} features but the summary has {}",
                map.feature_count(),
                self.feature_count()
            )));
        }
        if output.len() != self.output_len() {
            return Err(Error::invalid(format!(
                "output has {} coefficients but the summary expects {}",
                output.len(),
                self.output_len()
            )));
        }
        let z = DVector::from_vec(map.compute(input.coefficients())?);
        let a = DVector::from_column_slice(output.coefficients());
        self.gram.ger(1.0, &z, &z, 1.0);
        self.cross.ger(1.0, &z, &a, 1.0);
        self.count += 1;
        Ok(())
    }

    /// Entrywise sum of two summaries over disjoint data.
    pub fn merge(&mut self, other: &TrainingSummary) -> Result<()> {
        if self.gram.shape() != other.gram.shape() || self.cross.shape() != other.cross.shape() {
            return Err(Error::invalid("cannot merge summaries of different shapes"));
        }
        self.gram += &other.gram;
        self.cross += &other.cross;
        self.count += other.count;
        Ok(())
    }

    /// Builds the summary of a projected dataset. Instances are grouped in
    /// fixed shards; shards run in parallel and are merged in order.
    pub fn from_projected(data: &ProjectedDataset, map: &RksFeatureMap) -> Result<Self> {
        let s = data.input_set().len();
        if map.input_dim() != s {
            return Err(Error::invalid(format!(
                "feature map expects {} input coefficients but U has {s}",
                map.input_dim()
            )));
        }
        let (d, r) = (map.feature_count(), data.output_set().len());
        let n = data.len();
        let shards: Vec<(usize, usize)> = (0..n)
            .step_by(SHARD)
            .map(|start| (start, (start + SHARD).min(n)))
            .collect();
        let mut total = TrainingSummary::new(d, r);
        let wave = rayon::current_num_threads().max(1);
        for group in shards.chunks(wave) {
            let parts: Vec<TrainingSummary> = group
                .par_iter()
                .map(|&(start, end)| shard_summary(data, map, start, end))
                .collect();
            for part in &parts {
                total.merge(part)?;
            }
        }
        Ok(total)
    }
}

fn shard_summary(data: &ProjectedDataset, map: &RksFeatureMap, start: usize, end: usize) -> TrainingSummary {
    let (d, r) = (map.feature_count(), data.output_set().len());
    let mut summary = TrainingSummary::new(d, r);
    let mut block_start = start;
    while block_start < end {
        let block_end = (block_start + BLOCK).min(end);
        let b = block_end - block_start;
        // Z^T for the block, one instance per column.
        let mut zt = DMatrix::zeros(d, b);
        let mut a = DMatrix::zeros(b, r);
        for (col, i) in (block_start..block_end).enumerate() {
            map.fill(data.input_row(i), zt.column_mut(col).as_mut_slice());
            for (k, &v) in data.output_row(i).iter().enumerate() {
                a[(col, k)] = v;
            }
        }
        let z = zt.transpose();
        summary.gram.gemm(1.0, &zt, &z, 1.0);
        summary.cross.gemm(1.0, &zt, &a, 1.0);
        summary.count += b;
        block_start = block_end;
    }
    summary
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager's estimate of `||A^-1||_1` for symmetric `A`, given a solver for `A`.
fn inverse_one_norm(n: usize, solve: impl Fn(&DVector<f64>) -> DVector<f64>) -> f64 {
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut estimate = 0.0;
    for _ in 0..5 {
        let y = solve(&x);
        estimate = y.iter().map(|v| v.abs()).sum();
        let sign = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = solve(&sign);
        let (j, zmax) = z
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v.abs()))
            .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    estimate
}

/// Estimated 1-norm condition number of a symmetric matrix.
pub fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let norm = one_norm(a);
    if let Some(chol) = a.clone().cholesky() {
        return norm * inverse_one_norm(n, |b| chol.solve(b));
    }
    let lu = a.clone().full_piv_lu();
    if !lu.is_invertible() {
        return f64::INFINITY;
    }
    let est = norm
        * inverse_one_norm(n, |b| {
            lu.solve(b).unwrap_or_else(|| DVector::from_element(n, f64::INFINITY))
        });
    if est.is_finite() {
        est
    } else {
        f64::INFINITY
    }
}

/// Solves `(gram + lambda I) Psi = cross`.
///
/// With `lambda = 0` the system is first checked with a condition estimate:
/// above [`CONDITION_LIMIT`] the solve is refused, above
/// [`CONDITION_BORDERLINE`] it goes through fully pivoted LU instead of
/// Cholesky. No inverse is ever formed.
pub fn solve(summary: &TrainingSummary, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "ridge penalty must be finite and >= 0, got {lambda}"
        )));
    }
    let mut a = summary.gram.clone();
    if lambda > 0.0 {
        for i in 0..a.nrows() {
            a[(i, i)] += lambda;
        }
    }
    let n = a.nrows();
    match a.clone().cholesky() {
        Some(chol) => {
            if lambda == 0.0 {
                let condition = one_norm(&a) * inverse_one_norm(n, |b| chol.solve(b));
                if !(condition <= CONDITION_LIMIT) {
                    return Err(Error::IllConditioned { condition });
                }
                if condition > CONDITION_BORDERLINE {
                    return pivoted_solve(a, &summary.cross, condition);
                }
            }
            Ok(chol.solve(&summary.cross))
        }
        None if lambda == 0.0 => Err(Error::IllConditioned {
            condition: condition_estimate(&a),
        }),
        None => {
            // PSD gram plus a positive shift only fails Cholesky through
            // round-off; fall back to pivoting.
            pivoted_solve(a, &summary.cross, f64::NAN)
        }
    }
}

fn pivoted_solve(a: DMatrix<f64>, cross: &DMatrix<f64>, condition: f64) -> Result<DMatrix<f64>> {
    a.full_piv_lu().solve(cross).ok_or(Error::IllConditioned { condition })
}

/// A fitted triple-basis estimator.
#[derive(Clone, Debug)]
pub struct Model3BE {
    input_set: Arc<BasisIndexSet>,
    output_set: Arc<BasisIndexSet>,
    feature_map: RksFeatureMap,
    psi: DMatrix<f64>,
    ridge_lambda: f64,
    training_count: usize,
}

impl Model3BE {
    pub fn new(
        input_set: Arc<BasisIndexSet>,
        output_set: Arc<BasisIndexSet>,
        feature_map: RksFeatureMap,
        psi: DMatrix<f64>,
        ridge_lambda: f64,
        training_count: usize,
    ) -> Result<Self> {
        if feature_map.input_dim() != input_set.len() {
            return Err(Error::DimensionInconsistency(format!(
                "feature map input dimension {} differs from |U| = {}",
                feature_map.input_dim(),
                input_set.len()
            )));
        }
        if psi.shape() != (feature_map.feature_count(), output_set.len()) {
            return Err(Error::DimensionInconsistency(format!(
                "psi is {}x{} but expected {}x{}",
                psi.nrows(),
                psi.ncols(),
                feature_map.feature_count(),
                output_set.len()
            )));
        }
        if !(ridge_lambda >= 0.0) || !ridge_lambda.is_finite() {
            return Err(Error::DimensionInconsistency(format!(
                "ridge penalty must be >= 0, got {ridge_lambda}"
            )));
        }
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::DimensionInconsistency("psi has non-finite entries".into()));
        }
        Ok(Model3BE {
            input_set,
            output_set,
            feature_map,
            psi,
            ridge_lambda,
            training_count,
        })
    }

    pub fn input_set(&self) -> &Arc<BasisIndexSet> {
        &self.input_set
    }

    pub fn output_set(&self) -> &Arc<BasisIndexSet> {
        &self.output_set
    }

    pub fn feature_map(&self) -> &RksFeatureMap {
        &self.feature_map
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn ridge_lambda(&self) -> f64 {
        self.ridge_lambda
    }

    pub fn training_count(&self) -> usize {
        self.training_count
    }

    /// `Psi^T z(a)` for an input coefficient vector over `U`.
    pub fn predict_from_coeffs(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_set.len() {
            return Err(Error::invalid(format!(
                "expected {} input coefficients, got {}",
                self.input_set.len(),
                input.len()
            )));
        }
        let mut z = vec![0.0; self.feature_map.feature_count()];
        self.feature_map.fill(input, &mut z);
        Ok(self.apply_psi(&z))
    }

    /// `Psi^T z`, one dot product per output coefficient over the
    /// contiguous columns of `Psi`.
    pub fn apply_psi(&self, z: &[f64]) -> Vec<f64> {
        let d = self.psi.nrows();
        self.psi
            .as_slice()
            .chunks_exact(d)
            .map(|col| basis::dot(col, z))
            .collect()
    }

    /// Predicted output coefficients over `V`. Cost is `O(sn + Ds + Dr)`,
    /// independent of the training set size.
    pub fn predict_coeffs(&self, input: &FunctionObservation) -> Result<CoefficientVector> {
        if input.dimension() != self.input_set.dimension() {
            return Err(Error::invalid(format!(
                "input observation has dimension {} but the model expects {}",
                input.dimension(),
                self.input_set.dimension()
            )));
        }
        if input.is_empty() {
            return Err(Error::invalid("cannot predict from an empty observation"));
        }
        let a = basis::project_raw(input, &self.input_set);
        let out = self.predict_from_coeffs(&a)?;
        CoefficientVector::new(Arc::clone(&self.output_set), out)
    }

    /// Predicted output function evaluated at `x`.
    pub fn predict_function(&self, input: &FunctionObservation, x: &[f64]) -> Result<f64> {
        basis::reconstruct(&self.predict_coeffs(input)?, x)
    }
}

/// Fits a model from already projected data.
pub fn fit_projected(data: &ProjectedDataset, map: &RksFeatureMap, lambda: f64) -> Result<Model3BE> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let summary = TrainingSummary::from_projected(data, map)?;
    let psi = solve(&summary, lambda)?;
    Model3BE::new(
        Arc::clone(data.input_set()),
        Arc::clone(data.output_set()),
        map.clone(),
        psi,
        lambda,
        data.len(),
    )
}

/// Projects every pair onto `U` and `V`, accumulates the normal equations
/// and solves them.
pub fn fit(
    dataset: &[ObservationPair],
    input_set: &Arc<BasisIndexSet>,
    output_set: &Arc<BasisIndexSet>,
    map: &RksFeatureMap,
    lambda: f64,
) -> Result<Model3BE> {
    let data = ProjectedDataset::project(dataset, input_set, output_set)?;
    fit_projected(&data, map, lambda)
}
