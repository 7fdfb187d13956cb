//! Turning scalar time series into function-to-function training pairs.
//!
//! Windows of `w` consecutive samples start every `stride` steps. Each window
//! becomes a noisy-evaluation observation on the fixed grid
//! `t_j = (j + 0.5) / w`. Values are first mapped affinely onto `[0, 1]` using
//! the global minimum and maximum of the data.

use serde::{Deserialize, Serialize};

use crate::basis::FunctionObservation;
use crate::dataset::ObservationPair;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMode {
    /// Window `i` predicts window `i + 1` of the same series.
    Forward,
    /// A window of one series predicts the same time span of another.
    CoOccurring,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesWindowing {
    pub window_length: usize,
    pub mode: WindowMode,
    pub stride: usize,
}

impl SeriesWindowing {
    /// Disjoint consecutive forward windows.
    pub fn forward(window_length: usize) -> Self {
        SeriesWindowing {
            window_length,
            mode: WindowMode::Forward,
            stride: window_length,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.window_length < 2 {
            return Err(Error::invalid(format!(
                "window length must be >= 2, got {}",
                self.window_length
            )));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride must be >= 1"));
        }
        Ok(())
    }
}

/// `scaled = (raw - offset) * scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    pub offset: f64,
    pub scale: f64,
}

impl AffineTransform {
    /// Maps `[min, max]` onto `[0, 1]`; a constant series maps to 0.
    pub fn unit_range(values: impl IntoIterator<Item = f64>) -> Self {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let scale = if hi > lo { 1.0 / (hi - lo) } else { 1.0 };
        AffineTransform {
            offset: if lo.is_finite() { lo } else { 0.0 },
            scale,
        }
    }

    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.offset) * self.scale
    }

    pub fn invert(&self, scaled: f64) -> f64 {
        scaled / self.scale + self.offset
    }
}

#[derive(Clone, Debug)]
pub struct WindowedSeries {
    pub pairs: Vec<ObservationPair>,
    pub transform: AffineTransform,
}

/// Grid points `(j + 0.5) / w`.
pub fn window_grid(window_length: usize) -> Vec<f64> {
    (0..window_length)
        .map(|j| (j as f64 + 0.5) / window_length as f64)
        .collect()
}

fn window_observation(values: &[f64], grid: &[f64], transform: &AffineTransform) -> FunctionObservation {
    let scaled = values.iter().map(|&v| transform.apply(v)).collect();
    FunctionObservation::noisy_1d(grid.to_vec(), scaled).expect("grid lies in the unit interval")
}

/// Forward windowing of a single series: `floor((L - w) / stride)` pairs.
pub fn window_series(values: &[f64], windowing: &SeriesWindowing) -> Result<WindowedSeries> {
    windowing.validate()?;
    if windowing.mode != WindowMode::Forward {
        return Err(Error::invalid(
            "co-occurring windowing needs an output series; use window_series_pair",
        ));
    }
    let w = windowing.window_length;
    if values.len() < 2 * w {
        return Err(Error::invalid(format!(
            "series of length {} is shorter than two windows of {w}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let transform = AffineTransform::unit_range(values.iter().copied());
    window_forward_with(values, windowing, transform)
}

/// Forward windowing with a caller-supplied value transform, for splitting
/// one series into separately windowed segments that share a scale.
pub fn window_forward_with(
    values: &[f64],
    windowing: &SeriesWindowing,
    transform: AffineTransform,
) -> Result<WindowedSeries> {
    windowing.validate()?;
    let w = windowing.window_length;
    if values.len() < 2 * w {
        return Err(Error::invalid(format!(
            "series of length {} is shorter than two windows of {w}",
            values.len()
        )));
    }
    let grid = window_grid(w);
    let count = (values.len() - w) / windowing.stride;
    let pairs = (0..count)
        .map(|i| {
            let a = i * windowing.stride;
            let b = a + windowing.stride;
            ObservationPair::new(
                window_observation(&values[a..a + w], &grid, &transform),
                window_observation(&values[b..b + w], &grid, &transform),
            )
        })
        .collect();
    Ok(WindowedSeries { pairs, transform })
}

/// Co-occurring windowing of two aligned series: window `i` of `input`
/// paired with the same span of `output`. One transform, fitted on both
/// series together, is applied to all values.
pub fn window_series_pair(input: &[f64], output: &[f64], windowing: &SeriesWindowing) -> Result<WindowedSeries> {
    windowing.validate()?;
    if windowing.mode != WindowMode::CoOccurring {
        return Err(Error::invalid("paired windowing requires co-occurring mode"));
    }
    if input.len() != output.len() {
        return Err(Error::invalid(format!(
            "series lengths differ ({} vs {})",
            input.len(),
            output.len()
        )));
    }
    let w = windowing.window_length;
    if input.len() < w {
        return Err(Error::invalid(format!(
            "series of length {} is shorter than one window of {w}",
            input.len()
        )));
    }
    if input.iter().chain(output).any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let transform = AffineTransform::unit_range(input.iter().chain(output).copied());
    let grid = window_grid(w);
    let count = (input.len() - w) / windowing.stride + 1;
    let pairs = (0..count)
        .map(|i| {
            let a = i * windowing.stride;
            ObservationPair::new(
                window_observation(&input[a..a + w], &grid, &transform),
                window_observation(&output[a..a + w], &grid, &transform),
            )
        })
        .collect();
    Ok(WindowedSeries { pairs, transform })
}
