//! Linear smoother estimator: a kernel-weighted average of training outputs.
//!
//! Weights are `K(d_i / h) / sum_j K(d_j / h)` where `d_i` is the L2 distance
//! between the query's input coefficients and training input `i`, and `K` is
//! the Epanechnikov kernel `max(0, 1 - u^2)`. When no training input is
//! within the kernel's support the prediction is the zero function.
//!
//! Every prediction scans the full training set; that linear cost is what the
//! benchmark contrasts with the triple-basis estimator.

use std::sync::Arc;

use crate::basis::{self, BasisIndexSet, CoefficientVector, FunctionObservation};
use crate::dataset::{ObservationPair, ProjectedDataset};
use crate::error::{Error, Result};

pub const KERNEL_TAG: &str = "epanechnikov";

#[inline]
pub fn epanechnikov(u: f64) -> f64 {
    (1.0 - u * u).max(0.0)
}

#[derive(Clone, Debug)]
pub struct LseModel {
    data: ProjectedDataset,
    bandwidth: f64,
}

impl LseModel {
    pub fn new(data: ProjectedDataset, bandwidth: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(LseModel { data, bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel_tag(&self) -> &'static str {
        KERNEL_TAG
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &ProjectedDataset {
        &self.data
    }

    pub fn input_set(&self) -> &Arc<BasisIndexSet> {
        self.data.input_set()
    }

    pub fn output_set(&self) -> &Arc<BasisIndexSet> {
        self.data.output_set()
    }

    /// Same data, different bandwidth.
    pub fn with_bandwidth(&self, bandwidth: f64) -> Result<Self> {
        LseModel::new(self.data.clone(), bandwidth)
    }

    fn check_query(&self, query: &[f64]) -> Result<()> {
        if query.len() != self.data.input_set().len() {
            return Err(Error::invalid(format!(
                "query has {} coefficients but the model's inputs have {}",
                query.len(),
                self.data.input_set().len()
            )));
        }
        Ok(())
    }

    /// Normalized smoothing weights for a query, or `None` when every kernel
    /// value is zero.
    pub fn weights(&self, query: &[f64]) -> Result<Option<Vec<f64>>> {
        self.check_query(query)?;
        let mut w: Vec<f64> = (0..self.data.len())
            .map(|i| epanechnikov(basis::l2_distance(query, self.data.input_row(i)) / self.bandwidth))
            .collect();
        let total: f64 = w.iter().sum();
        if total == 0.0 {
            return Ok(None);
        }
        w.iter_mut().for_each(|v| *v /= total);
        Ok(Some(w))
    }

    /// Weighted average of training outputs for input coefficients over `U`.
    pub fn predict_from_coeffs(&self, query: &[f64]) -> Result<Vec<f64>> {
        self.check_query(query)?;
        let r = self.data.output_set().len();
        let mut out = vec![0.0; r];
        let mut total = 0.0;
        for i in 0..self.data.len() {
            let k = epanechnikov(basis::l2_distance(query, self.data.input_row(i)) / self.bandwidth);
            if k > 0.0 {
                total += k;
                for (o, &q) in out.iter_mut().zip(self.data.output_row(i)) {
                    *o += k * q;
                }
            }
        }
        if total > 0.0 {
            out.iter_mut().for_each(|o| *o /= total);
        }
        Ok(out)
    }

    pub fn predict(&self, input: &FunctionObservation) -> Result<CoefficientVector> {
        if input.dimension() != self.data.input_set().dimension() {
            return Err(Error::invalid(format!(
                "input observation has dimension {} but the model expects {}",
                input.dimension(),
                self.data.input_set().dimension()
            )));
        }
        let query = basis::project(input, self.data.input_set())?;
        let out = self.predict_from_coeffs(query.coefficients())?;
        CoefficientVector::new(Arc::clone(self.data.output_set()), out)
    }
}

/// Projects and stores every training pair.
pub fn lse_fit(
    dataset: &[ObservationPair],
    input_set: &Arc<BasisIndexSet>,
    output_set: &Arc<BasisIndexSet>,
    bandwidth: f64,
) -> Result<LseModel> {
    LseModel::new(ProjectedDataset::project(dataset, input_set, output_set)?, bandwidth)
}

pub fn lse_predict(model: &LseModel, input: &FunctionObservation) -> Result<CoefficientVector> {
    model.predict(input)
}
