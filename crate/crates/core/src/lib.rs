//! Function-to-function regression.
//!
//! The triple-basis estimator ([`regress`]) maps noisy observations of an
//! input function to the projection coefficients of an output function
//! through three bases: an orthonormal cosine basis for inputs, random
//! kitchen sink features on the input coefficients, and an orthonormal basis
//! for outputs. The linear smoother ([`baseline`]) is the kernel-weighted
//! average it is benchmarked against.

pub mod baseline;
pub mod basis;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod persist;
pub mod regress;
pub mod rng;
pub mod synth;
pub mod tuning;
pub mod window;

pub use baseline::{lse_fit, lse_predict, LseModel};
pub use basis::{
    coeff_l2_distance, enumerate_ball, enumerate_kappa_ball, eval_basis, project, reconstruct, select_truncation,
    BasisIndexSet, CoefficientVector, FunctionObservation, MultiIndex, ObservationKind, SobolevSpec,
};
pub use bench::{run_benchmark, BenchmarkConfig, BenchmarkReport, Method};
pub use dataset::{ObservationPair, ProjectedDataset};
pub use error::{Error, Result};
pub use features::RksFeatureMap;
pub use persist::{load_model, save_model, AnyModel};
pub use regress::{fit, solve, Model3BE, TrainingSummary};
pub use synth::{MappingSpec, SyntheticConfig};
pub use window::{window_series, SeriesWindowing, WindowMode};
