//! Function-space error by quadrature, and prediction timing.

use std::time::Instant;

use crate::basis::{BasisEvaluator, CoefficientVector, FunctionObservation};
use crate::error::{Error, Result};

/// Midpoint rule on `[0, 1]^d` with a fixed number of nodes per axis.
#[derive(Clone, Debug)]
pub struct Quadrature {
    dimension: usize,
    per_axis: usize,
}

impl Quadrature {
    pub const DEFAULT_POINTS: usize = 1024;

    pub fn new(dimension: usize, per_axis: usize) -> Result<Self> {
        if dimension == 0 || per_axis == 0 {
            return Err(Error::invalid("quadrature needs positive dimension and node count"));
        }
        if (per_axis as f64).powi(dimension as i32) > 1e8 {
            return Err(Error::invalid(format!(
                "{per_axis}^{dimension} quadrature nodes is too many"
            )));
        }
        Ok(Quadrature { dimension, per_axis })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Calls `f` at every node; returns the mean of its values, which is the
    /// midpoint-rule integral over the unit cube.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let m = self.per_axis;
        let total = m.pow(self.dimension as u32);
        let mut x = vec![0.0; self.dimension];
        let mut sum = 0.0;
        for flat in 0..total {
            let mut rest = flat;
            for axis in (0..self.dimension).rev() {
                x[axis] = ((rest % m) as f64 + 0.5) / m as f64;
                rest /= m;
            }
            sum += f(&x);
        }
        sum / total as f64
    }

    /// `||f_a - f_b||_2^2` for two expansions that may use different index
    /// sets of the quadrature's dimension.
    pub fn l2_sq_distance(&self, a: &CoefficientVector, b: &CoefficientVector) -> Result<f64> {
        let (sa, sb) = (a.index_set(), b.index_set());
        if sa.dimension() != self.dimension || sb.dimension() != self.dimension {
            return Err(Error::invalid("expansion dimension differs from the quadrature's"));
        }
        let mut ea = BasisEvaluator::new(sa);
        let mut eb = BasisEvaluator::new(sb);
        let mut ra = vec![0.0; sa.len()];
        let mut rb = vec![0.0; sb.len()];
        Ok(self.integrate(|x| {
            ea.eval_into(x, &mut ra);
            eb.eval_into(x, &mut rb);
            let fa: f64 = ra.iter().zip(a.coefficients()).map(|(p, c)| p * c).sum();
            let fb: f64 = rb.iter().zip(b.coefficients()).map(|(p, c)| p * c).sum();
            (fa - fb) * (fa - fb)
        }))
    }
}

/// Held-out inputs paired with the output functions they should map to.
#[derive(Clone, Debug)]
pub struct EvaluationSet {
    pub inputs: Vec<FunctionObservation>,
    pub truths: Vec<CoefficientVector>,
}

impl EvaluationSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Mean over instances of `||f_hat - f||_2^2`.
    pub fn mse(&self, predictions: &[CoefficientVector], quadrature: &Quadrature) -> Result<f64> {
        if predictions.len() != self.truths.len() || self.truths.is_empty() {
            return Err(Error::invalid(format!(
                "{} predictions for {} truths",
                predictions.len(),
                self.truths.len()
            )));
        }
        let mut total = 0.0;
        for (p, t) in predictions.iter().zip(&self.truths) {
            total += quadrature.l2_sq_distance(p, t)?;
        }
        Ok(total / self.truths.len() as f64)
    }

    /// Mean squared L2 distance of the truths from their own mean function.
    pub fn output_variance(&self, quadrature: &Quadrature) -> Result<f64> {
        let first = self.truths.first().ok_or(Error::EmptyDataset)?;
        let set = first.index_set();
        if self.truths.iter().any(|t| !t.same_index_set(first)) {
            return Err(Error::invalid("truths use different index sets"));
        }
        let n = self.truths.len() as f64;
        let mut mean = vec![0.0; set.len()];
        for t in &self.truths {
            for (m, c) in mean.iter_mut().zip(t.coefficients()) {
                *m += c / n;
            }
        }
        let mean = CoefficientVector::new(set.clone(), mean)?;
        let mut total = 0.0;
        for t in &self.truths {
            total += quadrature.l2_sq_distance(t, &mean)?;
        }
        Ok(total / n)
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Runs `predict` once over every input as a warm-up, then again timing each
/// call with the monotonic clock. Returns the outputs of the timed pass and
/// the median seconds per call.
pub fn timed_predictions<T>(
    inputs: &[FunctionObservation],
    mut predict: impl FnMut(&FunctionObservation) -> Result<T>,
) -> Result<(Vec<T>, f64)> {
    for x in inputs {
        std::hint::black_box(predict(x)?);
    }
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut times = Vec::with_capacity(inputs.len());
    for x in inputs {
        let start = Instant::now();
        let y = predict(x)?;
        times.push(start.elapsed().as_secs_f64());
        outputs.push(y);
    }
    Ok((outputs, median(&mut times)))
}
