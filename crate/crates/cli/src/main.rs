//! `ffr`: fit, apply, evaluate and benchmark function-to-function regressors.
//!
//! Exit status is 0 on success, 1 for user errors (bad flags, unreadable or
//! malformed inputs, invalid settings) and 2 for internal failures.
//! Behaviour depends on flags and files only, never on the environment.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ffr_core::bench::{self, BenchmarkConfig, FitOptions, SyntheticTask, TaskConfig};
use ffr_core::dataset::{self, ObservationPair, ProjectedDataset};
use ffr_core::eval::{timed_predictions, EvaluationSet, Quadrature};
use ffr_core::persist::{self, AnyModel};
use ffr_core::window::{self, SeriesWindowing};
use ffr_core::{basis, Error, MultiIndex};

#[derive(Parser)]
#[command(name = "ffr", version, about = "Function-to-function regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a JSON-lines dataset and save it
    Fit(FitArgs),
    /// Predict output coefficients for every input in a dataset
    Predict(PredictArgs),
    /// Score a saved model against held-out pairs
    Eval(EvalArgs),
    /// Run a benchmark and write its report
    Bench(BenchArgs),
    /// Generate a synthetic dataset
    Synth(SynthArgs),
    /// Turn a one-column series into forward-prediction pairs
    Window(WindowArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FitMethod {
    #[value(name = "3be")]
    ThreeBe,
    Lse,
}

#[derive(Args)]
struct Hyper {
    /// RKS kernel bandwidth
    #[arg(long)]
    sigma: Option<f64>,
    /// Ridge penalty (0 for ordinary least squares)
    #[arg(long)]
    lambda: Option<f64>,
    /// Smoother bandwidth
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Number of random features D
    #[arg(long)]
    features: Option<usize>,
    /// Radius of the input index ball
    #[arg(long)]
    radius_in: Option<f64>,
    /// Radius of the output index ball
    #[arg(long)]
    radius_out: Option<f64>,
    /// Folds for truncation cross-validation
    #[arg(long)]
    folds: Option<usize>,
    /// Largest candidate radius for truncation cross-validation
    #[arg(long)]
    max_radius: Option<usize>,
}

impl Hyper {
    fn apply(&self, config: &mut BenchmarkConfig) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if self.$field.is_some() {
                    config.$field = self.$field;
                }
            )*};
        }
        set!(sigma, lambda, bandwidth, features, radius_in, radius_out);
        if let Some(f) = self.folds {
            config.folds = f;
        }
        if let Some(m) = self.max_radius {
            config.max_radius = m;
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Training pairs (JSON lines)
    #[arg(long)]
    data: PathBuf,
    /// Where to write the model
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "3be")]
    method: FitMethod,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    hyper: Hyper,
    /// Optional JSON summary of the chosen hyperparameters
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Pairs whose inputs are predicted (outputs are ignored)
    #[arg(long)]
    data: PathBuf,
    /// Output file; standard output if omitted
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Held-out pairs (JSON lines)
    #[arg(long)]
    data: PathBuf,
    /// Quadrature nodes per axis
    #[arg(long, default_value_t = Quadrature::DEFAULT_POINTS)]
    quadrature: usize,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark config (JSON); a synthetic task is used if omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training instances for the default synthetic task
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Methods to run, comma separated (3be, lse, mean)
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
    #[command(flatten)]
    hyper: Hyper,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Where to write the training pairs
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    /// Optional held-out pairs from the same mapping
    #[arg(long)]
    test_data: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    test_instances: usize,
    /// Evaluation points per function
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = ffr_core::synth::DEFAULT_ANCHORS)]
    anchors: usize,
    #[arg(long, default_value_t = 1.0)]
    mapping_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct WindowArgs {
    /// One value per line
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    window: usize,
    /// Defaults to the window length
    #[arg(long)]
    stride: Option<usize>,
    /// Where to write the pairs (JSON lines)
    #[arg(long)]
    report: PathBuf,
}

enum Failure {
    User(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_user_error() {
            Failure::User(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => run_bench(a),
        Command::Synth(a) => synth(a),
        Command::Window(a) => window_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Internal(e.to_string()))
}

fn emit(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, format!("{text}\n"))?,
        None => {
            let mut out = io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    Ok(())
}

fn mean_points(pairs: &[ObservationPair]) -> usize {
    let total: usize = pairs.iter().map(|p| p.input.len()).sum();
    (total as f64 / pairs.len().max(1) as f64).round() as usize
}

#[derive(Serialize)]
struct FitSummary {
    model_type: &'static str,
    train_count: usize,
    s: usize,
    r: usize,
    fit_seconds: f64,
    hyperparameters: bench::Hyperparameters,
    #[serde(skip_serializing_if = "Option::is_none")]
    features: Option<usize>,
}

fn fit(args: FitArgs) -> CliResult {
    let pairs = dataset::read_jsonl_file(&args.data)?;
    let mut config = BenchmarkConfig::new(TaskConfig::Synthetic(SyntheticTask::new(1)), args.seed);
    args.hyper.apply(&mut config);
    let options: FitOptions = config.fit_options();
    if options.folds < 2 {
        return Err(Failure::User(format!("--folds must be >= 2, got {}", options.folds)));
    }
    let start = Instant::now();
    let (input_set, output_set, radius_in, radius_out) = bench::select_index_sets(&pairs, &options)?;
    let data = ProjectedDataset::project(&pairs, &input_set, &output_set)?;
    let (model, features, mut hyper) = match args.method {
        FitMethod::ThreeBe => {
            let (m, d, h) = bench::fit_three_be(&options, &data, mean_points(&pairs))?;
            (AnyModel::ThreeBe(m), Some(d), h)
        }
        FitMethod::Lse => {
            let m = bench::fit_lse(&options, &data)?;
            let h = bench::Hyperparameters {
                bandwidth: Some(m.bandwidth()),
                ..Default::default()
            };
            (AnyModel::Lse(m), None, h)
        }
    };
    let fit_seconds = start.elapsed().as_secs_f64();
    hyper.radius_in = radius_in;
    hyper.radius_out = radius_out;
    persist::save_any(&model, &args.model)?;
    let summary = FitSummary {
        model_type: model.type_tag(),
        train_count: data.len(),
        s: input_set.len(),
        r: output_set.len(),
        fit_seconds,
        hyperparameters: hyper,
        features,
    };
    let text = to_json(&summary)?;
    match &args.report {
        Some(p) => emit(Some(p), &text),
        None => {
            eprintln!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct Predictions {
    output_indices: Vec<MultiIndex>,
    predictions: Vec<Vec<f64>>,
}

fn predict(args: PredictArgs) -> CliResult {
    let model = persist::load_any(&args.model)?;
    let pairs = dataset::read_jsonl_file(&args.data)?;
    let predictions = pairs
        .iter()
        .map(|p| model.predict_coeffs(&p.input).map(|c| c.coefficients().to_vec()))
        .collect::<ffr_core::Result<Vec<_>>>()?;
    let doc = Predictions {
        output_indices: model.output_set().indices().to_vec(),
        predictions,
    };
    let text = serde_json::to_string(&doc).map_err(|e| Failure::Internal(e.to_string()))?;
    emit(args.report.as_deref(), &text)
}

#[derive(Serialize)]
struct EvalReport {
    model_type: &'static str,
    test_count: usize,
    mse: f64,
    mpt_seconds: f64,
}

fn eval(args: EvalArgs) -> CliResult {
    let model = persist::load_any(&args.model)?;
    let pairs = dataset::read_jsonl_file(&args.data)?;
    let output_set = model.output_set();
    let quadrature = Quadrature::new(output_set.dimension(), args.quadrature)?;
    let mut inputs = Vec::with_capacity(pairs.len());
    let mut truths = Vec::with_capacity(pairs.len());
    for p in pairs {
        truths.push(basis::project(&p.output, output_set)?);
        inputs.push(p.input);
    }
    let evaluation = EvaluationSet { inputs, truths };
    let (predictions, mpt_seconds) = timed_predictions(&evaluation.inputs, |x| model.predict_coeffs(x))?;
    let report = EvalReport {
        model_type: model.type_tag(),
        test_count: evaluation.len(),
        mse: evaluation.mse(&predictions, &quadrature)?,
        mpt_seconds,
    };
    emit(args.report.as_deref(), &to_json(&report)?)
}

fn run_bench(args: BenchArgs) -> CliResult {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str::<BenchmarkConfig>(&text)
                .map_err(|e| Failure::User(format!("{}: {e}", path.display())))?
        }
        None => BenchmarkConfig::new(TaskConfig::Synthetic(SyntheticTask::new(args.instances)), 0),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if !args.method.is_empty() {
        config.methods = args.method.clone();
    }
    args.hyper.apply(&mut config);
    let report = bench::run_benchmark(&config)?;
    for r in &report.records {
        eprintln!(
            "{:>5}  mse {:.6e}  mpt {:.3e} s  fit {:.3} s",
            r.method, r.mse, r.mpt_seconds, r.fit_seconds
        );
    }
    emit(args.report.as_deref(), &report.to_json()?)
}

fn write_pairs(path: &Path, pairs: &[ObservationPair]) -> CliResult {
    let file = fs::File::create(path)?;
    dataset::write_jsonl(BufWriter::new(file), pairs)?;
    Ok(())
}

fn synth(args: SynthArgs) -> CliResult {
    let task = SyntheticTask {
        noise_sd: args.noise,
        points_per_function: args.points,
        test_count: args.test_instances.max(1),
        anchors: args.anchors,
        mapping_sigma: args.mapping_sigma,
        ..SyntheticTask::new(args.instances)
    };
    let (train, test) = bench::synthetic_split(&task, args.seed)?;
    write_pairs(&args.data, &train)?;
    if let Some(path) = &args.test_data {
        let pairs: Vec<ObservationPair> = test.into_iter().map(|t| t.pair).collect();
        write_pairs(path, &pairs)?;
    }
    Ok(())
}

fn window_cmd(args: WindowArgs) -> CliResult {
    let values = dataset::read_series_file(&args.data)?;
    let windowing = SeriesWindowing {
        stride: args.stride.unwrap_or(args.window),
        ..SeriesWindowing::forward(args.window)
    };
    let out = window::window_series(&values, &windowing)?;
    write_pairs(&args.report, &out.pairs)?;
    println!("{}", to_json(&out.transform)?);
    Ok(())
}
