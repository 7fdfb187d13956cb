//! Model files.
//!
//! A model is one JSON document. Floats are written in shortest round-trip
//! decimal form and read back exactly, so a loaded model predicts bit-for-bit
//! what the saved one did. Layout for the triple-basis estimator:
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "model_type": "3be",
//!   "basis_tag": "cosine",
//!   "dimensions": {"input_dim": l, "output_dim": k, "s": s, "r": r, "features": D},
//!   "input_index_set":  [[0], [1], ...],        // s multi-indices of length l
//!   "output_index_set": [[0], [1], ...],        // r multi-indices of length k
//!   "input_rule": {...}, "output_rule": {...},  // optional provenance
//!   "sigma": 1.0, "lambda": 0.001, "seed": 7,
//!   "frequencies": {"shape": [D, s], "rows": [[...], ...]},
//!   "phases": [...],                            // D entries
//!   "psi": {"shape": [D, r], "rows": [[...], ...]},
//!   "training_count": N
//! }
//! ```
//!
//! The linear smoother uses the same envelope with `"model_type": "lse"`,
//! `"kernel_tag"`, `"bandwidth"`, and `"train_inputs"` / `"train_outputs"`
//! matrices of shape `[N, s]` and `[N, r]`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baseline::{self, LseModel};
use crate::basis::{BasisIndexSet, CoefficientVector, FunctionObservation, IndexRule, MultiIndex, BASIS_TAG};
use crate::dataset::ProjectedDataset;
use crate::error::{Error, Result};
use crate::features::RksFeatureMap;
use crate::regress::Model3BE;

pub const FORMAT_VERSION: u64 = 1;
pub const THREE_BE_TYPE: &str = "3be";
pub const LSE_TYPE: &str = "lse";

#[derive(Serialize, Deserialize)]
struct Matrix {
    shape: [usize; 2],
    rows: Vec<Vec<f64>>,
}

impl Matrix {
    fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Self {
        Matrix {
            shape: [rows, cols],
            rows: data.chunks_exact(cols.max(1)).take(rows).map(<[f64]>::to_vec).collect(),
        }
    }

    fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        Matrix {
            shape: [m.nrows(), m.ncols()],
            rows: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    fn check(&self, name: &str, rows: usize, cols: usize) -> Result<()> {
        if self.shape != [rows, cols] {
            return Err(Error::DimensionInconsistency(format!(
                "{name} has shape {:?}, expected [{rows}, {cols}]",
                self.shape
            )));
        }
        if self.rows.len() != rows {
            return Err(Error::DimensionInconsistency(format!(
                "{name} declares {rows} rows but holds {}",
                self.rows.len()
            )));
        }
        if let Some(i) = self.rows.iter().position(|r| r.len() != cols) {
            return Err(Error::DimensionInconsistency(format!(
                "{name} row {i} has length {}, expected {cols}",
                self.rows[i].len()
            )));
        }
        Ok(())
    }

    fn into_dmatrix(self) -> DMatrix<f64> {
        let [r, c] = self.shape;
        DMatrix::from_row_iterator(r, c, self.rows.into_iter().flatten())
    }

    fn into_row_major(self) -> Vec<f64> {
        self.rows.into_iter().flatten().collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ThreeBeDims {
    input_dim: usize,
    output_dim: usize,
    s: usize,
    r: usize,
    features: usize,
}

#[derive(Serialize, Deserialize)]
struct ThreeBeFile {
    format_version: u64,
    model_type: String,
    basis_tag: String,
    dimensions: ThreeBeDims,
    input_index_set: Vec<MultiIndex>,
    output_index_set: Vec<MultiIndex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_rule: Option<IndexRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_rule: Option<IndexRule>,
    sigma: f64,
    lambda: f64,
    seed: u64,
    frequencies: Matrix,
    phases: Vec<f64>,
    psi: Matrix,
    training_count: usize,
}

#[derive(Serialize, Deserialize)]
struct LseDims {
    input_dim: usize,
    output_dim: usize,
    s: usize,
    r: usize,
    instances: usize,
}

#[derive(Serialize, Deserialize)]
struct LseFile {
    format_version: u64,
    model_type: String,
    basis_tag: String,
    kernel_tag: String,
    dimensions: LseDims,
    input_index_set: Vec<MultiIndex>,
    output_index_set: Vec<MultiIndex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_rule: Option<IndexRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_rule: Option<IndexRule>,
    bandwidth: f64,
    train_inputs: Matrix,
    train_outputs: Matrix,
}

fn rule_of(set: &BasisIndexSet) -> Option<IndexRule> {
    match set.rule() {
        IndexRule::Explicit => None,
        rule => Some(rule.clone()),
    }
}

fn build_set(
    name: &str,
    dimension: usize,
    size: usize,
    indices: Vec<MultiIndex>,
    rule: Option<IndexRule>,
) -> Result<Arc<BasisIndexSet>> {
    if indices.len() != size {
        return Err(Error::DimensionInconsistency(format!(
            "{name} lists {} indices but dimensions declare {size}",
            indices.len()
        )));
    }
    let set = BasisIndexSet::from_indices(dimension, indices)
        .map_err(|e| Error::DimensionInconsistency(format!("{name}: {e}")))?;
    Ok(Arc::new(match rule {
        Some(rule) => set.with_rule(rule),
        None => set,
    }))
}

fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    serde_json::to_string(doc).map_err(|e| Error::Parse(e.to_string()))
}

/// Parses the envelope and checks version and type before anything else.
fn parse_envelope(text: &str) -> Result<(Value, String)> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        if e.is_eof() {
            Error::Truncated(e.to_string())
        } else {
            Error::Parse(e.to_string())
        }
    })?;
    let found = value
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Parse("missing or non-integer format_version".into()))?;
    if found != FORMAT_VERSION {
        return Err(Error::Version {
            found,
            expected: FORMAT_VERSION,
        });
    }
    let model_type = value
        .get("model_type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Parse("missing model_type".into()))?
        .to_string();
    let tag = value.get("basis_tag").and_then(Value::as_str).unwrap_or_default();
    if tag != BASIS_TAG {
        return Err(Error::Parse(format!(
            "unsupported basis `{tag}` (this build provides `{BASIS_TAG}`)"
        )));
    }
    Ok((value, model_type))
}

fn expect_type(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::ModelType {
            found: found.into(),
            expected: expected.into(),
        });
    }
    Ok(())
}

pub fn model_to_string(model: &Model3BE) -> Result<String> {
    let map = model.feature_map();
    let (u, v) = (model.input_set(), model.output_set());
    let doc = ThreeBeFile {
        format_version: FORMAT_VERSION,
        model_type: THREE_BE_TYPE.into(),
        basis_tag: BASIS_TAG.into(),
        dimensions: ThreeBeDims {
            input_dim: u.dimension(),
            output_dim: v.dimension(),
            s: u.len(),
            r: v.len(),
            features: map.feature_count(),
        },
        input_index_set: u.indices().to_vec(),
        output_index_set: v.indices().to_vec(),
        input_rule: rule_of(u),
        output_rule: rule_of(v),
        sigma: map.bandwidth(),
        lambda: model.ridge_lambda(),
        seed: map.seed(),
        frequencies: Matrix::from_dmatrix(map.frequencies()),
        phases: map.phases().to_vec(),
        psi: Matrix::from_dmatrix(model.psi()),
        training_count: model.training_count(),
    };
    to_json(&doc)
}

pub fn model_from_str(text: &str) -> Result<Model3BE> {
    let (value, model_type) = parse_envelope(text)?;
    expect_type(&model_type, THREE_BE_TYPE)?;
    three_be_from_value(value)
}

fn three_be_from_value(value: Value) -> Result<Model3BE> {
    let doc: ThreeBeFile = serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    let dims = &doc.dimensions;
    let u = build_set(
        "input_index_set",
        dims.input_dim,
        dims.s,
        doc.input_index_set,
        doc.input_rule,
    )?;
    let v = build_set(
        "output_index_set",
        dims.output_dim,
        dims.r,
        doc.output_index_set,
        doc.output_rule,
    )?;
    doc.frequencies.check("frequencies", dims.features, dims.s)?;
    doc.psi.check("psi", dims.features, dims.r)?;
    if doc.phases.len() != dims.features {
        return Err(Error::DimensionInconsistency(format!(
            "{} phases for {} features",
            doc.phases.len(),
            dims.features
        )));
    }
    let map = RksFeatureMap::from_parts(doc.sigma, doc.seed, doc.frequencies.into_dmatrix(), doc.phases)?;
    Model3BE::new(u, v, map, doc.psi.into_dmatrix(), doc.lambda, doc.training_count)
}

pub fn lse_to_string(model: &LseModel) -> Result<String> {
    let data = model.data();
    let (u, v) = (data.input_set(), data.output_set());
    let doc = LseFile {
        format_version: FORMAT_VERSION,
        model_type: LSE_TYPE.into(),
        basis_tag: BASIS_TAG.into(),
        kernel_tag: model.kernel_tag().into(),
        dimensions: LseDims {
            input_dim: u.dimension(),
            output_dim: v.dimension(),
            s: u.len(),
            r: v.len(),
            instances: data.len(),
        },
        input_index_set: u.indices().to_vec(),
        output_index_set: v.indices().to_vec(),
        input_rule: rule_of(u),
        output_rule: rule_of(v),
        bandwidth: model.bandwidth(),
        train_inputs: Matrix::from_row_major(data.len(), u.len(), data.input_rows()),
        train_outputs: Matrix::from_row_major(data.len(), v.len(), data.output_rows()),
    };
    to_json(&doc)
}

pub fn lse_from_str(text: &str) -> Result<LseModel> {
    let (value, model_type) = parse_envelope(text)?;
    expect_type(&model_type, LSE_TYPE)?;
    lse_from_value(value)
}

fn lse_from_value(value: Value) -> Result<LseModel> {
    let doc: LseFile = serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.kernel_tag != baseline::KERNEL_TAG {
        return Err(Error::Parse(format!(
            "unsupported smoothing kernel `{}` (this build provides `{}`)",
            doc.kernel_tag,
            baseline::KERNEL_TAG
        )));
    }
    let dims = &doc.dimensions;
    let u = build_set(
        "input_index_set",
        dims.input_dim,
        dims.s,
        doc.input_index_set,
        doc.input_rule,
    )?;
    let v = build_set(
        "output_index_set",
        dims.output_dim,
        dims.r,
        doc.output_index_set,
        doc.output_rule,
    )?;
    doc.train_inputs.check("train_inputs", dims.instances, dims.s)?;
    doc.train_outputs.check("train_outputs", dims.instances, dims.r)?;
    let data = ProjectedDataset::from_rows(
        u,
        v,
        doc.train_inputs.into_row_major(),
        doc.train_outputs.into_row_major(),
    )
    .map_err(|e| Error::DimensionInconsistency(e.to_string()))?;
    LseModel::new(data, doc.bandwidth).map_err(|e| Error::DimensionInconsistency(e.to_string()))
}

/// Either kind of fitted model.
#[derive(Clone, Debug)]
pub enum AnyModel {
    ThreeBe(Model3BE),
    Lse(LseModel),
}

impl AnyModel {
    pub fn parse(text: &str) -> Result<Self> {
        let (value, model_type) = parse_envelope(text)?;
        match model_type.as_str() {
            THREE_BE_TYPE => Ok(AnyModel::ThreeBe(three_be_from_value(value)?)),
            LSE_TYPE => Ok(AnyModel::Lse(lse_from_value(value)?)),
            other => Err(Error::ModelType {
                found: other.into(),
                expected: format!("{THREE_BE_TYPE}` or `{LSE_TYPE}"),
            }),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        match self {
            AnyModel::ThreeBe(m) => model_to_string(m),
            AnyModel::Lse(m) => lse_to_string(m),
        }
    }

    pub fn predict_coeffs(&self, input: &FunctionObservation) -> Result<CoefficientVector> {
        match self {
            AnyModel::ThreeBe(m) => m.predict_coeffs(input),
            AnyModel::Lse(m) => m.predict(input),
        }
    }

    pub fn input_set(&self) -> &Arc<BasisIndexSet> {
        match self {
            AnyModel::ThreeBe(m) => m.input_set(),
            AnyModel::Lse(m) => m.input_set(),
        }
    }

    pub fn output_set(&self) -> &Arc<BasisIndexSet> {
        match self {
            AnyModel::ThreeBe(m) => m.output_set(),
            AnyModel::Lse(m) => m.output_set(),
        }
    }

    pub fn type_tag(&self) -> &'static str {
        match self {
            AnyModel::ThreeBe(_) => THREE_BE_TYPE,
            AnyModel::Lse(_) => LSE_TYPE,
        }
    }
}

pub fn save_model(model: &Model3BE, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_string(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model3BE> {
    model_from_str(&fs::read_to_string(path)?)
}

pub fn save_any(model: &AnyModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model.to_json()?)?;
    Ok(())
}

pub fn load_any(path: impl AsRef<Path>) -> Result<AnyModel> {
    AnyModel::parse(&fs::read_to_string(path)?)
}
