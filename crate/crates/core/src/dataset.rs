//! Training pairs, their projected form, and the JSON-lines dataset format.
//!
//! One pair per line:
//!
//! ```text
//! {"input": {"kind": "noisy-evaluations", "points": [[0.1], [0.7]], "values": [1.2, 0.3]},
//!  "output": {"kind": "density-sample", "points": [[0.4, 0.2], [0.9, 0.5]]}}
//! ```
//!
//! Blank lines are ignored. Every input must share one dimension and every
//! output another; all coordinates lie in `[0, 1]`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{self, BasisIndexSet, CoefficientVector, FunctionObservation, ObservationKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationPair {
    pub input: FunctionObservation,
    pub output: FunctionObservation,
}

impl ObservationPair {
    pub fn new(input: FunctionObservation, output: FunctionObservation) -> Self {
        ObservationPair { input, output }
    }
}

/// Checks that a dataset is non-empty and dimensionally uniform; returns the
/// input and output dimensions.
pub fn dataset_dimensions(pairs: &[ObservationPair]) -> Result<(usize, usize)> {
    let first = pairs.first().ok_or(Error::EmptyDataset)?;
    let (l, k) = (first.input.dimension(), first.output.dimension());
    for (i, p) in pairs.iter().enumerate() {
        if p.input.dimension() != l || p.output.dimension() != k {
            return Err(Error::invalid(format!(
                "pair {i} has dimensions ({}, {}) but pair 0 has ({l}, {k})",
                p.input.dimension(),
                p.output.dimension()
            )));
        }
    }
    Ok((l, k))
}

/// Input and output projection coefficients of a whole dataset, stored as
/// row-major `N x s` and `N x r` blocks.
#[derive(Clone, Debug)]
pub struct ProjectedDataset {
    input_set: Arc<BasisIndexSet>,
    output_set: Arc<BasisIndexSet>,
    inputs: Vec<f64>,
    outputs: Vec<f64>,
}

impl ProjectedDataset {
    /// Projects every pair onto `U` (inputs) and `V` (outputs), in parallel.
    pub fn project(
        pairs: &[ObservationPair],
        input_set: &Arc<BasisIndexSet>,
        output_set: &Arc<BasisIndexSet>,
    ) -> Result<Self> {
        let (l, k) = dataset_dimensions(pairs)?;
        if l != input_set.dimension() || k != output_set.dimension() {
            return Err(Error::invalid(format!(
                "dataset dimensions ({l}, {k}) do not match index sets ({}, {})",
                input_set.dimension(),
                output_set.dimension()
            )));
        }
        let rows: Vec<(Vec<f64>, Vec<f64>)> = pairs
            .par_iter()
            .map(|p| {
                (
                    basis::project_raw(&p.input, input_set),
                    basis::project_raw(&p.output, output_set),
                )
            })
            .collect();
        let mut inputs = Vec::with_capacity(rows.len() * input_set.len());
        let mut outputs = Vec::with_capacity(rows.len() * output_set.len());
        for (a, b) in rows {
            inputs.extend(a);
            outputs.extend(b);
        }
        Ok(ProjectedDataset {
            input_set: Arc::clone(input_set),
            output_set: Arc::clone(output_set),
            inputs,
            outputs,
        })
    }

    pub fn from_rows(
        input_set: Arc<BasisIndexSet>,
        output_set: Arc<BasisIndexSet>,
        inputs: Vec<f64>,
        outputs: Vec<f64>,
    ) -> Result<Self> {
        let (s, r) = (input_set.len(), output_set.len());
        if s == 0 || r == 0 || inputs.len() % s != 0 || outputs.len() % r != 0 {
            return Err(Error::invalid("coefficient blocks do not match index set sizes"));
        }
        if inputs.len() / s != outputs.len() / r {
            return Err(Error::invalid("input and output blocks hold different instance counts"));
        }
        Ok(ProjectedDataset {
            input_set,
            output_set,
            inputs,
            outputs,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_set(&self) -> &Arc<BasisIndexSet> {
        &self.input_set
    }

    pub fn output_set(&self) -> &Arc<BasisIndexSet> {
        &self.output_set
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        let s = self.input_set.len();
        &self.inputs[i * s..(i + 1) * s]
    }

    pub fn output_row(&self, i: usize) -> &[f64] {
        let r = self.output_set.len();
        &self.outputs[i * r..(i + 1) * r]
    }

    pub fn input_rows(&self) -> &[f64] {
        &self.inputs
    }

    pub fn output_rows(&self) -> &[f64] {
        &self.outputs
    }

    pub fn input_coeffs(&self, i: usize) -> CoefficientVector {
        CoefficientVector::new(Arc::clone(&self.input_set), self.input_row(i).to_vec())
            .expect("rows match the index set")
    }

    pub fn output_coeffs(&self, i: usize) -> CoefficientVector {
        CoefficientVector::new(Arc::clone(&self.output_set), self.output_row(i).to_vec())
            .expect("rows match the index set")
    }

    /// Instances at the given positions, in that order.
    pub fn select(&self, positions: &[usize]) -> ProjectedDataset {
        let mut inputs = Vec::with_capacity(positions.len() * self.input_set.len());
        let mut outputs = Vec::with_capacity(positions.len() * self.output_set.len());
        for &i in positions {
            inputs.extend_from_slice(self.input_row(i));
            outputs.extend_from_slice(self.output_row(i));
        }
        ProjectedDataset {
            input_set: Arc::clone(&self.input_set),
            output_set: Arc::clone(&self.output_set),
            inputs,
            outputs,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ObservationRecord {
    kind: ObservationKind,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PairRecord {
    input: ObservationRecord,
    output: ObservationRecord,
}

impl From<&FunctionObservation> for ObservationRecord {
    fn from(obs: &FunctionObservation) -> Self {
        ObservationRecord {
            kind: obs.kind(),
            points: obs.points().map(<[f64]>::to_vec).collect(),
            values: obs.values().map(<[f64]>::to_vec),
        }
    }
}

fn observation_from_record(rec: ObservationRecord, line: usize, role: &str) -> Result<FunctionObservation> {
    let malformed = |message: String| Error::MalformedLine { line, message };
    let dim = rec
        .points
        .first()
        .map(Vec::len)
        .ok_or_else(|| malformed(format!("{role} has no points")))?;
    if dim == 0 {
        return Err(Error::LineDimension {
            line,
            message: format!("{role} points have zero length"),
        });
    }
    if let Some(j) = rec.points.iter().position(|p| p.len() != dim) {
        return Err(Error::LineDimension {
            line,
            message: format!(
                "{role} point {j} has length {} but point 0 has length {dim}",
                rec.points[j].len()
            ),
        });
    }
    for (j, p) in rec.points.iter().enumerate() {
        if let Some(u) = p.iter().find(|u| !(0.0..=1.0).contains(*u)) {
            return Err(Error::OutOfRange {
                line,
                message: format!("{role} point {j} has coordinate {u}"),
            });
        }
    }
    let flat: Vec<f64> = rec.points.into_iter().flatten().collect();
    match (rec.kind, rec.values) {
        (ObservationKind::NoisyEvaluations, Some(values)) => {
            let n = flat.len() / dim;
            if values.len() != n {
                return Err(Error::LineDimension {
                    line,
                    message: format!("{role} has {n} points but {} values", values.len()),
                });
            }
            FunctionObservation::noisy(dim, flat, values).map_err(|e| malformed(format!("{role}: {e}")))
        }
        (ObservationKind::NoisyEvaluations, None) => {
            Err(malformed(format!("{role} is noisy-evaluations but has no values")))
        }
        (ObservationKind::DensitySample, None) => {
            FunctionObservation::density_sample(dim, flat).map_err(|e| malformed(format!("{role}: {e}")))
        }
        (ObservationKind::DensitySample, Some(_)) => {
            Err(malformed(format!("{role} is a density sample but carries values")))
        }
    }
}

/// Parses a JSON-lines dataset. Line numbers in errors are 1-based.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<ObservationPair>> {
    let mut pairs = Vec::new();
    let mut dims: Option<(usize, usize, usize)> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PairRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        let input = observation_from_record(rec.input, line_no, "input")?;
        let output = observation_from_record(rec.output, line_no, "output")?;
        let (l, k) = (input.dimension(), output.dimension());
        match dims {
            None => dims = Some((l, k, line_no)),
            Some((l0, k0, first)) if (l0, k0) != (l, k) => {
                return Err(Error::LineDimension {
                    line: line_no,
                    message: format!("dimensions ({l}, {k}) differ from ({l0}, {k0}) on line {first}"),
                });
            }
            Some(_) => {}
        }
        pairs.push(ObservationPair { input, output });
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(pairs)
}

pub fn read_jsonl_file(path: impl AsRef<Path>) -> Result<Vec<ObservationPair>> {
    read_jsonl(BufReader::new(File::open(path)?))
}

pub fn write_jsonl<W: Write>(mut writer: W, pairs: &[ObservationPair]) -> Result<()> {
    for p in pairs {
        let rec = PairRecord {
            input: (&p.input).into(),
            output: (&p.output).into(),
        };
        serde_json::to_writer(&mut writer, &rec).map_err(|e| Error::Parse(e.to_string()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_jsonl_file(path: impl AsRef<Path>, pairs: &[ObservationPair]) -> Result<()> {
    write_jsonl(std::io::BufWriter::new(File::create(path)?), pairs)
}

/// Reads a plain numeric series: one value per line, blank lines and lines
/// starting with `#` ignored.
pub fn read_series<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let v: f64 = text.parse().map_err(|_| Error::MalformedLine {
            line: i + 1,
            message: format!("`{text}` is not a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::MalformedLine {
                line: i + 1,
                message: format!("non-finite value `{text}`"),
            });
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(values)
}

pub fn read_series_file(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    read_series(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<ObservationPair>> {
        read_jsonl(text.as_bytes())
    }

    const GOOD: &str = r#"{"input":{"kind":"noisy-evaluations","points":[[0.1],[0.9]],"values":[1.0,2.0]},"output":{"kind":"density-sample","points":[[0.2,0.3]]}}"#;

    #[test]
    fn parses_valid_line() {
        let pairs = parse(GOOD).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].input.len(), 2);
        assert_eq!(pairs[0].output.dimension(), 2);
        assert_eq!(pairs[0].output.kind(), ObservationKind::DensitySample);
    }

    #[test]
    fn empty_input_is_empty_dataset() {
        assert!(matches!(parse(""), Err(Error::EmptyDataset)));
        assert!(matches!(parse("\n  \n"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn out_of_range_names_line() {
        let bad = GOOD.replace("0.9]", "1.0000001]");
        let text = format!("{GOOD}\n{bad}\n");
        match parse(&text) {
            Err(Error::OutOfRange { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected out-of-range, got {other:?}"),
        }
    }

    #[test]
    fn malformed_and_dimension_errors_are_distinct() {
        match parse(&format!("{GOOD}\n{{not json")) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let wider = GOOD.replace("[[0.1],[0.9]]", "[[0.1,0.2],[0.9,0.3]]");
        match parse(&format!("{GOOD}\n\n{wider}")) {
            Err(Error::LineDimension { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let ragged = GOOD.replace("[[0.1],[0.9]]", "[[0.1],[0.9,0.3]]");
        assert!(matches!(parse(&ragged), Err(Error::LineDimension { line: 1, .. })));
        let short = GOOD.replace("[1.0,2.0]", "[1.0]");
        assert!(matches!(parse(&short), Err(Error::LineDimension { line: 1, .. })));
        let missing = GOOD.replace(r#","values":[1.0,2.0]"#, "");
        assert!(matches!(parse(&missing), Err(Error::MalformedLine { line: 1, .. })));
    }

    #[test]
    fn series_parsing() {
        let v = read_series("# header\n1.5\n\n-2\n".as_bytes()).unwrap();
        assert_eq!(v, vec![1.5, -2.0]);
        assert!(matches!(
            read_series("1\nabc\n".as_bytes()),
            Err(Error::MalformedLine { line: 2, .. })
        ));
        assert!(matches!(read_series("".as_bytes()), Err(Error::EmptyDataset)));
    }
}
