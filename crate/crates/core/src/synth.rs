//! Synthetic function-to-function problems with known ground truth.
//!
//! Input functions have coefficients `c_alpha = xi_alpha / (1 + kappa_alpha^2)`
//! with standard normal `xi`, truncated at `kappa <= 16` and rescaled into the
//! Sobolev ellipsoid when needed. Output coefficients come from a kernel
//! smoother over fixed anchor functions,
//!
//! ```text
//! f_alpha(p) = sum_i theta_{alpha,i} exp(-||g_i - p||^2 / (2 sigma^2)),
//! ```
//!
//! with `||theta_alpha||_1 <= B_alpha` and `sum_alpha B_alpha^2 kappa_alpha^2 <= A_O`,
//! evaluated exactly (no random features) so it can serve as an oracle.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{self, BasisEvaluator, BasisIndexSet, CoefficientVector, FunctionObservation, SobolevSpec};
use crate::dataset::ObservationPair;
use crate::error::{Error, Result};
use crate::features::rbf_kernel;
use crate::rng::{self, Gaussian};

/// Input functions are truncated at `kappa_alpha <= INPUT_TRUNCATION`.
pub const INPUT_TRUNCATION: f64 = 16.0;
pub const DEFAULT_ANCHORS: usize = 25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub input_spec: SobolevSpec,
    pub output_spec: SobolevSpec,
    pub noise_sd: f64,
    pub points_per_function: usize,
    pub instance_count: usize,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::invalid(format!("noise_sd must be >= 0, got {}", self.noise_sd)));
        }
        if self.points_per_function == 0 || self.instance_count == 0 {
            return Err(Error::invalid("points per function and instance count must be >= 1"));
        }
        Ok(())
    }
}

/// Index set on which input functions live.
pub fn input_support(spec: &SobolevSpec) -> Result<BasisIndexSet> {
    basis::enumerate_kappa_ball(spec, INPUT_TRUNCATION)
}

fn draw_input(set: &Arc<BasisIndexSet>, spec: &SobolevSpec, gauss: &mut Gaussian<impl Rng>) -> CoefficientVector {
    let kappa_sq: Vec<f64> = set.indices().iter().map(|a| spec.kappa_sq(a)).collect();
    let mut coeffs: Vec<f64> = kappa_sq.iter().map(|k2| gauss.sample() / (1.0 + k2)).collect();
    let energy: f64 = coeffs.iter().zip(&kappa_sq).map(|(c, k2)| c * c * k2).sum();
    if energy > spec.amplitude {
        // Land strictly inside the ellipsoid despite round-off.
        let scale = (spec.amplitude / energy).sqrt() * (1.0 - 1e-12);
        coeffs.iter_mut().for_each(|c| *c *= scale);
    }
    CoefficientVector::new(Arc::clone(set), coeffs).expect("finite coefficients")
}

/// One random input function from the measure described in the module docs.
pub fn sample_input_function(spec: &SobolevSpec, seed: u64) -> Result<CoefficientVector> {
    let set = Arc::new(input_support(spec)?);
    Ok(draw_input(&set, spec, &mut Gaussian::new(rng::stream(seed, 0))))
}

/// `sum_alpha c_alpha^2 kappa_alpha^2`.
pub fn ellipsoid_energy(coeffs: &CoefficientVector, spec: &SobolevSpec) -> f64 {
    coeffs
        .index_set()
        .indices()
        .iter()
        .zip(coeffs.coefficients())
        .map(|(a, c)| c * c * spec.kappa_sq(a))
        .sum()
}

/// A member of the kernel-smoother mapping class.
#[derive(Clone, Debug)]
pub struct MappingSpec {
    anchors: Vec<CoefficientVector>,
    /// `weights[k]` holds `theta` for the k-th output index.
    weights: Vec<Vec<f64>>,
    bounds: Vec<f64>,
    output_set: Arc<BasisIndexSet>,
    output_spec: SobolevSpec,
    sigma: f64,
}

impl MappingSpec {
    pub fn new(
        anchors: Vec<CoefficientVector>,
        weights: Vec<Vec<f64>>,
        bounds: Vec<f64>,
        output_set: Arc<BasisIndexSet>,
        output_spec: SobolevSpec,
        sigma: f64,
    ) -> Result<Self> {
        let first = anchors
            .first()
            .ok_or_else(|| Error::invalid("mapping needs at least one anchor"))?;
        if anchors.iter().any(|g| !g.same_index_set(first)) {
            return Err(Error::invalid("anchors must share one index set"));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        if output_set.dimension() != output_spec.dimension() {
            return Err(Error::invalid("output index set and output spec differ in dimension"));
        }
        let r = output_set.len();
        if weights.len() != r || bounds.len() != r {
            return Err(Error::invalid(format!(
                "{} weight rows and {} bounds for {r} output indices",
                weights.len(),
                bounds.len()
            )));
        }
        for (k, (theta, &b)) in weights.iter().zip(&bounds).enumerate() {
            if theta.len() != anchors.len() {
                return Err(Error::invalid(format!(
                    "weight row {k} has {} entries for {} anchors",
                    theta.len(),
                    anchors.len()
                )));
            }
            let l1: f64 = theta.iter().map(|t| t.abs()).sum();
            if !(b >= 0.0) || l1 > b * (1.0 + 1e-12) {
                return Err(Error::invalid(format!(
                    "||theta||_1 = {l1} exceeds bound {b} for output index {k}"
                )));
            }
        }
        let budget: f64 = output_set
            .indices()
            .iter()
            .zip(&bounds)
            .map(|(a, b)| b * b * output_spec.kappa_sq(a))
            .sum();
        if budget > output_spec.amplitude * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "sum B^2 kappa^2 = {budget} exceeds A_O = {}",
                output_spec.amplitude
            )));
        }
        Ok(MappingSpec {
            anchors,
            weights,
            bounds,
            output_set,
            output_spec,
            sigma,
        })
    }

    /// Draws anchors from the input measure, sets `B_alpha` proportional to
    /// `1 / (1 + kappa_alpha^2)` at the largest scale the output ellipsoid
    /// allows, and draws each `theta_alpha` with `||theta_alpha||_1 = B_alpha`.
    pub fn sample(
        input_spec: &SobolevSpec,
        output_spec: &SobolevSpec,
        output_radius: f64,
        anchor_count: usize,
        sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        if anchor_count == 0 {
            return Err(Error::invalid("anchor count must be positive"));
        }
        let input_set = Arc::new(input_support(input_spec)?);
        let mut gauss = Gaussian::new(rng::stream(seed, 0));
        let anchors: Vec<CoefficientVector> = (0..anchor_count)
            .map(|_| draw_input(&input_set, input_spec, &mut gauss))
            .collect();

        let output_set = Arc::new(basis::enumerate_kappa_ball(output_spec, output_radius)?);
        let kappa_sq: Vec<f64> = output_set.indices().iter().map(|a| output_spec.kappa_sq(a)).collect();
        let shape: Vec<f64> = kappa_sq.iter().map(|k2| 1.0 / (1.0 + k2)).collect();
        let budget: f64 = shape.iter().zip(&kappa_sq).map(|(b, k2)| b * b * k2).sum();
        let scale = if budget > 0.0 {
            (output_spec.amplitude / budget).sqrt() * (1.0 - 1e-12)
        } else {
            1.0
        };
        let bounds: Vec<f64> = shape.iter().map(|b| b * scale).collect();

        let mut gauss = Gaussian::new(rng::stream(seed, 1));
        let weights = bounds
            .iter()
            .map(|&b| {
                let raw: Vec<f64> = (0..anchor_count).map(|_| gauss.sample()).collect();
                let l1: f64 = raw.iter().map(|t| t.abs()).sum();
                raw.iter().map(|t| t * b / l1 * (1.0 - 1e-12)).collect()
            })
            .collect();
        MappingSpec::new(anchors, weights, bounds, output_set, output_spec.clone(), sigma)
    }

    pub fn anchors(&self) -> &[CoefficientVector] {
        &self.anchors
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn input_set(&self) -> &Arc<BasisIndexSet> {
        self.anchors[0].index_set()
    }

    pub fn output_set(&self) -> &Arc<BasisIndexSet> {
        &self.output_set
    }

    pub fn output_spec(&self) -> &SobolevSpec {
        &self.output_spec
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Exact evaluation of the mapping on true input coefficients.
pub fn apply_mapping(mapping: &MappingSpec, input: &CoefficientVector) -> Result<CoefficientVector> {
    if !input.same_index_set(&mapping.anchors[0]) {
        return Err(Error::invalid(
            "input coefficients are not over the mapping's anchor index set",
        ));
    }
    let similarities: Vec<f64> = mapping
        .anchors
        .iter()
        .map(|g| {
            rbf_kernel(
                basis::l2_distance(g.coefficients(), input.coefficients()),
                mapping.sigma,
            )
        })
        .collect();
    let out = mapping
        .weights
        .iter()
        .map(|theta| basis::dot(theta, &similarities))
        .collect();
    CoefficientVector::new(Arc::clone(&mapping.output_set), out)
}

/// A generated pair together with the functions it was observed from.
#[derive(Clone, Debug)]
pub struct SyntheticInstance {
    pub input_truth: CoefficientVector,
    pub output_truth: CoefficientVector,
    pub pair: ObservationPair,
}

fn observe(truth: &CoefficientVector, n: usize, noise_sd: f64, seed: u64, stream: u64) -> FunctionObservation {
    let set = truth.index_set();
    let d = set.dimension();
    let mut rng = rng::stream(seed, stream);
    let points: Vec<f64> = (0..n * d).map(|_| rng::uniform(&mut rng)).collect();
    let mut gauss = Gaussian::new(rng);
    let mut eval = BasisEvaluator::new(set);
    let mut row = vec![0.0; set.len()];
    let values = points
        .chunks_exact(d)
        .map(|x| {
            eval.eval_into(x, &mut row);
            basis::dot(&row, truth.coefficients()) + noise_sd * gauss.sample()
        })
        .collect();
    FunctionObservation::noisy(d, points, values).expect("uniform points lie in the unit cube")
}

/// Generates instances with their ground truth. Instance `i` draws from its
/// own random streams, so output is identical under any parallel schedule.
pub fn generate_instances(config: &SyntheticConfig, mapping: &MappingSpec) -> Result<Vec<SyntheticInstance>> {
    config.validate()?;
    if config.input_spec != *mapping_input_spec(mapping)? {
        return Err(Error::invalid("config input spec does not match the mapping's anchors"));
    }
    let input_set = Arc::clone(mapping.input_set());
    (0..config.instance_count as u64)
        .into_par_iter()
        .map(|i| {
            let mut gauss = Gaussian::new(rng::stream(config.seed, 3 * i));
            let input_truth = draw_input(&input_set, &config.input_spec, &mut gauss);
            let output_truth = apply_mapping(mapping, &input_truth)?;
            let n = config.points_per_function;
            let input = observe(&input_truth, n, config.noise_sd, config.seed, 3 * i + 1);
            let output = observe(&output_truth, n, config.noise_sd, config.seed, 3 * i + 2);
            Ok(SyntheticInstance {
                input_truth,
                output_truth,
                pair: ObservationPair::new(input, output),
            })
        })
        .collect()
}

fn mapping_input_spec(mapping: &MappingSpec) -> Result<&SobolevSpec> {
    match mapping.input_set().rule() {
        basis::IndexRule::KappaBall { spec, .. } => Ok(spec),
        _ => Err(Error::invalid(
            "mapping anchors were not drawn from a Sobolev input measure",
        )),
    }
}

/// Noisy observation pairs only.
pub fn generate_dataset(config: &SyntheticConfig, mapping: &MappingSpec) -> Result<Vec<ObservationPair>> {
    Ok(generate_instances(config, mapping)?
        .into_iter()
        .map(|inst| inst.pair)
        .collect())
}
