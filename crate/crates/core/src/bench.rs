//! Benchmark harness: fits each requested method, scores held-out
//! function-space MSE by quadrature and times predictions.
//!
//! Every random choice derives from the config seed, so a report is
//! reproducible from its recorded config up to the timing fields.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baseline::LseModel;
use crate::basis::{self, BasisIndexSet, CoefficientVector, FunctionObservation, SobolevSpec};
use crate::dataset::{read_series_file, ObservationPair, ProjectedDataset};
use crate::error::{Error, Result};
use crate::eval::{timed_predictions, EvaluationSet, Quadrature};
use crate::features::RksFeatureMap;
use crate::regress::{self, Model3BE};
use crate::rng;
use crate::synth::{self, MappingSpec, SyntheticConfig, SyntheticInstance};
use crate::tuning;
use crate::window::{self, AffineTransform, SeriesWindowing};

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_DEFAULT_FEATURES: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "3be")]
    ThreeBe,
    #[serde(rename = "lse")]
    Lse,
    #[serde(rename = "mean")]
    Mean,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::ThreeBe, Method::Lse, Method::Mean];

    pub fn name(self) -> &'static str {
        match self {
            Method::ThreeBe => "3be",
            Method::Lse => "lse",
            Method::Mean => "mean",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod {
                name: s.to_string(),
                known: Method::ALL.map(Method::name).join(", "),
            })
    }
}

/// Default feature count `ceil(n ln n)`, capped.
pub fn default_feature_count(points_per_function: usize) -> usize {
    let n = points_per_function.max(2) as f64;
    ((n * n.ln()).ceil() as usize).clamp(1, MAX_DEFAULT_FEATURES)
}

fn default_noise() -> f64 {
    0.1
}
fn default_points() -> usize {
    100
}
fn default_anchors() -> usize {
    synth::DEFAULT_ANCHORS
}
fn default_one() -> f64 {
    1.0
}
fn default_output_radius() -> f64 {
    8.0
}
fn default_test_count() -> usize {
    200
}
fn default_train_fraction() -> f64 {
    0.85
}
fn default_folds() -> usize {
    5
}
fn default_max_radius() -> usize {
    10
}
fn default_subset() -> usize {
    tuning::DEFAULT_SUBSET
}
fn default_quadrature() -> usize {
    Quadrature::DEFAULT_POINTS
}
fn default_methods() -> Vec<String> {
    vec!["3be".into(), "lse".into(), "mean".into()]
}
fn default_spec() -> SobolevSpec {
    SobolevSpec::isotropic(1, 1.0).expect("valid isotropic spec")
}

/// Functions drawn from the mapping class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    #[serde(default = "default_spec")]
    pub input_spec: SobolevSpec,
    #[serde(default = "default_spec")]
    pub output_spec: SobolevSpec,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default = "default_points")]
    pub points_per_function: usize,
    pub train_count: usize,
    #[serde(default = "default_test_count")]
    pub test_count: usize,
    #[serde(default = "default_anchors")]
    pub anchors: usize,
    #[serde(default = "default_one")]
    pub mapping_sigma: f64,
    /// kappa radius of the output functions' support.
    #[serde(default = "default_output_radius")]
    pub output_radius: f64,
}

impl SyntheticTask {
    pub fn new(train_count: usize) -> Self {
        SyntheticTask {
            input_spec: default_spec(),
            output_spec: default_spec(),
            noise_sd: default_noise(),
            points_per_function: default_points(),
            train_count,
            test_count: default_test_count(),
            anchors: default_anchors(),
            mapping_sigma: default_one(),
            output_radius: default_output_radius(),
        }
    }
}

/// Forward prediction on a scalar series. The leading `train_fraction` of
/// the series is windowed for training, the rest for testing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesTask {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    pub window_length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskConfig {
    Synthetic(SyntheticTask),
    Series(SeriesTask),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub task: TaskConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_out: Option<f64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_max_radius")]
    pub max_radius: usize,
    #[serde(default = "default_subset")]
    pub cv_subset: usize,
    #[serde(default = "default_quadrature")]
    pub quadrature_points: usize,
}

impl BenchmarkConfig {
    pub fn new(task: TaskConfig, seed: u64) -> Self {
        BenchmarkConfig {
            task,
            methods: default_methods(),
            seed,
            features: None,
            sigma: None,
            lambda: None,
            bandwidth: None,
            radius_in: None,
            radius_out: None,
            folds: default_folds(),
            max_radius: default_max_radius(),
            cv_subset: default_subset(),
            quadrature_points: default_quadrature(),
        }
    }

    pub fn parsed_methods(&self) -> Result<Vec<Method>> {
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods requested"));
        }
        self.methods.iter().map(|m| m.parse()).collect()
    }

    fn validate(&self) -> Result<()> {
        self.parsed_methods()?;
        if self.folds < 2 {
            return Err(Error::invalid(format!("folds must be >= 2, got {}", self.folds)));
        }
        if self.features == Some(0) {
            return Err(Error::invalid("feature count must be >= 1"));
        }
        for (name, v) in [("sigma", self.sigma), ("bandwidth", self.bandwidth)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::invalid(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::invalid(format!("lambda must be >= 0, got {l}")));
            }
        }
        for (name, v) in [("radius_in", self.radius_in), ("radius_out", self.radius_out)] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub radius_in: f64,
    pub radius_out: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    /// Seed of the random feature map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: String,
    pub mse: f64,
    pub mpt_seconds: f64,
    pub fit_seconds: f64,
    pub train_count: usize,
    pub test_count: usize,
    pub points_per_function: usize,
    pub s: usize,
    pub r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<usize>,
    pub seed: u64,
    pub hyperparameters: Hyperparameters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub config: BenchmarkConfig,
    pub output_variance: f64,
    pub records: Vec<MethodRecord>,
}

impl BenchmarkReport {
    pub fn record(&self, method: Method) -> Option<&MethodRecord> {
        self.records.iter().find(|r| r.method == method.name())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: BenchmarkReport = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::Version {
                found: report.schema_version as u64,
                expected: SCHEMA_VERSION as u64,
            });
        }
        Ok(report)
    }
}

/// Report plus the fitted models and the held-out set they were scored on.
pub struct BenchmarkOutcome {
    pub report: BenchmarkReport,
    pub three_be: Option<Model3BE>,
    pub lse: Option<LseModel>,
    pub evaluation: EvaluationSet,
    pub quadrature: Quadrature,
}

/// Training pairs, evaluation set and observation size of a task.
pub struct PreparedTask {
    pub train: Vec<ObservationPair>,
    pub evaluation: EvaluationSet,
    pub points_per_function: usize,
}

/// Seed tags for the independent random choices of a run.
mod tag {
    pub const MAPPING: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const TEST: u64 = 3;
    pub const FEATURES: u64 = 4;
    pub const TUNING: u64 = 5;
}

pub fn prepare_task(config: &BenchmarkConfig) -> Result<PreparedTask> {
    match &config.task {
        TaskConfig::Synthetic(task) => prepare_synthetic(task, config.seed),
        TaskConfig::Series(task) => prepare_series(task),
    }
}

/// Training pairs and held-out instances with ground truth for a synthetic
/// task, all drawn from one mapping.
pub fn synthetic_split(task: &SyntheticTask, seed: u64) -> Result<(Vec<ObservationPair>, Vec<SyntheticInstance>)> {
    if task.train_count == 0 || task.test_count == 0 {
        return Err(Error::invalid("train and test counts must be >= 1"));
    }
    let mapping = MappingSpec::sample(
        &task.input_spec,
        &task.output_spec,
        task.output_radius,
        task.anchors,
        task.mapping_sigma,
        rng::derive(seed, tag::MAPPING),
    )?;
    let make = |count, tag| SyntheticConfig {
        input_spec: task.input_spec.clone(),
        output_spec: task.output_spec.clone(),
        noise_sd: task.noise_sd,
        points_per_function: task.points_per_function,
        instance_count: count,
        seed: rng::derive(seed, tag),
    };
    let train = synth::generate_dataset(&make(task.train_count, tag::TRAIN), &mapping)?;
    let test = synth::generate_instances(&make(task.test_count, tag::TEST), &mapping)?;
    Ok((train, test))
}

fn prepare_synthetic(task: &SyntheticTask, seed: u64) -> Result<PreparedTask> {
    let (train, test) = synthetic_split(task, seed)?;
    let (inputs, truths) = test.into_iter().map(|t| (t.pair.input, t.output_truth)).unzip();
    Ok(PreparedTask {
        train,
        evaluation: EvaluationSet { inputs, truths },
        points_per_function: task.points_per_function,
    })
}

fn prepare_series(task: &SeriesTask) -> Result<PreparedTask> {
    let values = match (&task.values, &task.path) {
        (Some(v), None) => v.clone(),
        (None, Some(p)) => read_series_file(p)?,
        _ => return Err(Error::invalid("series task needs exactly one of `values` or `path`")),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    if !(task.train_fraction > 0.0 && task.train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train_fraction must lie in (0, 1), got {}",
            task.train_fraction
        )));
    }
    let w = task.window_length;
    let windowing = SeriesWindowing {
        stride: task.stride.unwrap_or(w),
        ..SeriesWindowing::forward(w)
    };
    let transform = AffineTransform::unit_range(values.iter().copied());
    let split = (values.len() as f64 * task.train_fraction).floor() as usize;
    let train = window::window_forward_with(&values[..split], &windowing, transform)?;
    let test = window::window_forward_with(&values[split..], &windowing, transform)?;
    if train.pairs.is_empty() || test.pairs.is_empty() {
        return Err(Error::invalid("series too short for a train/test split"));
    }
    let full = series_truth_set(w)?;
    let mut inputs = Vec::with_capacity(test.pairs.len());
    let mut truths = Vec::with_capacity(test.pairs.len());
    for p in test.pairs {
        truths.push(basis::project(&p.output, &full)?);
        inputs.push(p.input);
    }
    Ok(PreparedTask {
        train: train.pairs,
        evaluation: EvaluationSet { inputs, truths },
        points_per_function: w,
    })
}

/// A held-out window of length `w` is represented by its projection on the
/// first `w` cosines, which interpolates the window on its grid.
fn series_truth_set(w: usize) -> Result<Arc<BasisIndexSet>> {
    tuning::ball(1, (w - 1) as f64)
}

pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    Ok(run_benchmark_detailed(config)?.report)
}

pub fn run_benchmark_detailed(config: &BenchmarkConfig) -> Result<BenchmarkOutcome> {
    config.validate()?;
    let methods = config.parsed_methods()?;
    let task = prepare_task(config)?;
    let (_, k) = crate::dataset::dataset_dimensions(&task.train)?;
    let quadrature = Quadrature::new(k, config.quadrature_points)?;
    let evaluation = task.evaluation;

    let options = config.fit_options();
    let (input_set, output_set, radius_in, radius_out) = select_index_sets(&task.train, &options)?;
    let data = ProjectedDataset::project(&task.train, &input_set, &output_set)?;
    let n = task.points_per_function;
    let base = MethodRecord {
        method: String::new(),
        mse: 0.0,
        mpt_seconds: 0.0,
        fit_seconds: 0.0,
        train_count: data.len(),
        test_count: evaluation.len(),
        points_per_function: n,
        s: input_set.len(),
        r: output_set.len(),
        features: None,
        seed: config.seed,
        hyperparameters: Hyperparameters {
            radius_in,
            radius_out,
            ..Hyperparameters::default()
        },
    };

    let mut records = Vec::with_capacity(methods.len());
    let mut three_be = None;
    let mut lse = None;
    for method in methods {
        let mut record = MethodRecord {
            method: method.name().to_string(),
            ..base.clone()
        };
        let start = Instant::now();
        let (predictions, mpt) = match method {
            Method::ThreeBe => {
                let (model, features, hyper) = fit_three_be(&options, &data, n)?;
                record.features = Some(features);
                record.hyperparameters = Hyperparameters {
                    radius_in,
                    radius_out,
                    ..hyper
                };
                record.fit_seconds = start.elapsed().as_secs_f64();
                let out = timed_predictions(&evaluation.inputs, |x| model.predict_coeffs(x))?;
                three_be = Some(model);
                out
            }
            Method::Lse => {
                let model = fit_lse(&options, &data)?;
                record.hyperparameters.bandwidth = Some(model.bandwidth());
                record.fit_seconds = start.elapsed().as_secs_f64();
                let out = timed_predictions(&evaluation.inputs, |x| model.predict(x))?;
                lse = Some(model);
                out
            }
            Method::Mean => {
                let mean = mean_output(&data)?;
                record.fit_seconds = start.elapsed().as_secs_f64();
                timed_predictions(&evaluation.inputs, |_| Ok(mean.clone()))?
            }
        };
        record.mpt_seconds = mpt;
        record.mse = evaluation.mse(&predictions, &quadrature)?;
        records.push(record);
    }
    let output_variance = evaluation.output_variance(&quadrature)?;
    Ok(BenchmarkOutcome {
        report: BenchmarkReport {
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            output_variance,
            records,
        },
        three_be,
        lse,
        evaluation,
        quadrature,
    })
}

/// Settings shared by every fitting entry point. Unset hyperparameters are
/// chosen by cross-validation.
#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub seed: u64,
    pub features: Option<usize>,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub bandwidth: Option<f64>,
    pub radius_in: Option<f64>,
    pub radius_out: Option<f64>,
    pub folds: usize,
    pub max_radius: usize,
    pub cv_subset: usize,
}

impl FitOptions {
    pub fn new(seed: u64) -> Self {
        BenchmarkConfig::new(TaskConfig::Synthetic(SyntheticTask::new(1)), seed).fit_options()
    }
}

impl BenchmarkConfig {
    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            seed: self.seed,
            features: self.features,
            sigma: self.sigma,
            lambda: self.lambda,
            bandwidth: self.bandwidth,
            radius_in: self.radius_in,
            radius_out: self.radius_out,
            folds: self.folds,
            max_radius: self.max_radius,
            cv_subset: self.cv_subset,
        }
    }
}

/// Euclidean balls `U` and `V`, with radii taken from the options or chosen
/// by per-instance cross-validation. Returns `(U, V, radius_in, radius_out)`.
pub fn select_index_sets(
    pairs: &[ObservationPair],
    options: &FitOptions,
) -> Result<(Arc<BasisIndexSet>, Arc<BasisIndexSet>, f64, f64)> {
    let (l, k) = crate::dataset::dataset_dimensions(pairs)?;
    let (radius_in, radius_out) = match (options.radius_in, options.radius_out) {
        (Some(a), Some(b)) => (a, b),
        (a, b) => {
            let candidates = tuning::integer_radii(options.max_radius);
            let (ci, co) = tuning::select_index_radii(pairs, &candidates, options.folds, options.cv_subset)?;
            (a.unwrap_or(ci), b.unwrap_or(co))
        }
    };
    Ok((
        tuning::ball(l, radius_in)?,
        tuning::ball(k, radius_out)?,
        radius_in,
        radius_out,
    ))
}

/// Fits the triple-basis estimator, tuning whichever of `sigma` and `lambda`
/// are unset. Returns the model, its feature count and the chosen values.
pub fn fit_three_be(
    options: &FitOptions,
    data: &ProjectedDataset,
    points_per_function: usize,
) -> Result<(Model3BE, usize, Hyperparameters)> {
    let features = options
        .features
        .unwrap_or_else(|| default_feature_count(points_per_function));
    let feature_seed = rng::derive(options.seed, tag::FEATURES);
    let (sigma, lambda) = match (options.sigma, options.lambda) {
        (Some(s), Some(l)) => (s, l),
        (sigma, lambda) => {
            let sigmas = match sigma {
                Some(s) => vec![s],
                None => {
                    let med = tuning::median_input_distance(data, 200);
                    tuning::SIGMA_FACTORS.iter().map(|f| f * med).collect()
                }
            };
            let choice = tuning::tune_three_be_with(data, features, feature_seed, &sigmas, |summary| match lambda {
                Some(l) => vec![l],
                None => tuning::relative_ridge_grid(summary, &tuning::RIDGE_FACTORS),
            })?;
            (choice.sigma, choice.lambda)
        }
    };
    let map = RksFeatureMap::sample(data.input_set().len(), features, sigma, feature_seed)?;
    let model = regress::fit_projected(data, &map, lambda)?;
    let hyper = Hyperparameters {
        sigma: Some(sigma),
        lambda: Some(lambda),
        feature_seed: Some(feature_seed),
        ..Hyperparameters::default()
    };
    Ok((model, features, hyper))
}

/// Fits the linear smoother, tuning the bandwidth if unset.
pub fn fit_lse(options: &FitOptions, data: &ProjectedDataset) -> Result<LseModel> {
    let bandwidth = match options.bandwidth {
        Some(h) => h,
        None => {
            let med = tuning::median_input_distance(data, 200);
            let grid: Vec<f64> = tuning::BANDWIDTH_FACTORS.iter().map(|f| f * med).collect();
            tuning::tune_lse(data, rng::derive(options.seed, tag::TUNING), &grid)?.bandwidth
        }
    };
    LseModel::new(data.clone(), bandwidth)
}

/// Mean of the training output projections.
pub fn mean_output(data: &ProjectedDataset) -> Result<CoefficientVector> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let r = data.output_set().len();
    let mut mean = vec![0.0; r];
    for i in 0..data.len() {
        for (m, c) in mean.iter_mut().zip(data.output_row(i)) {
            *m += c;
        }
    }
    let count = data.len() as f64;
    mean.iter_mut().for_each(|m| *m /= count);
    CoefficientVector::new(Arc::clone(data.output_set()), mean)
}

/// Scores any predictor on an evaluation set without timing.
pub fn score(
    evaluation: &EvaluationSet,
    quadrature: &Quadrature,
    mut predict: impl FnMut(&FunctionObservation) -> Result<CoefficientVector>,
) -> Result<f64> {
    let predictions = evaluation.inputs.iter().map(&mut predict).collect::<Result<Vec<_>>>()?;
    evaluation.mse(&predictions, quadrature)
}
