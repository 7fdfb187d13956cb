//! Random kitchen sink features for the Gaussian RBF kernel.
//!
//! `z(x) = sqrt(2/D) [cos(w_1.x + b_1), ..., cos(w_D.x + b_D)]` with
//! `w_i ~ N(0, sigma^-2 I)` and `b_i ~ Unif[0, 2 pi)`, so that
//! `E[z(x).z(y)] = exp(-||x - y||^2 / (2 sigma^2))`.

use std::f64::consts::TAU;

use multiversion::multiversion;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::{self, Gaussian};

/// The RBF kernel `exp(-r^2 / (2 sigma^2))` approximated by the features.
#[inline]
pub fn rbf_kernel(distance: f64, bandwidth: f64) -> f64 {
    (-(distance * distance) / (2.0 * bandwidth * bandwidth)).exp()
}

/// A frozen draw of random frequencies and phases.
#[derive(Clone, Debug, PartialEq)]
pub struct RksFeatureMap {
    bandwidth: f64,
    seed: u64,
    /// `D x s`, row `i` is `w_i`.
    frequencies: DMatrix<f64>,
    phases: Vec<f64>,
}

impl RksFeatureMap {
    /// Draws `feature_count` frequency/phase pairs for inputs of length
    /// `input_dim`. Frequencies are standard normals scaled by `1/bandwidth`,
    /// so maps sharing a seed differ only by that scale.
    pub fn sample(input_dim: usize, feature_count: usize, bandwidth: f64, seed: u64) -> Result<Self> {
        if input_dim == 0 || feature_count == 0 {
            return Err(Error::invalid(format!(
                "input dimension and feature count must be positive (got {input_dim}, {feature_count})"
            )));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let mut gauss = Gaussian::new(rng::stream(seed, 0));
        let mut frequencies = DMatrix::zeros(feature_count, input_dim);
        for i in 0..feature_count {
            for j in 0..input_dim {
                frequencies[(i, j)] = gauss.sample() / bandwidth;
            }
        }
        let mut phase_rng = rng::stream(seed, 1);
        let phases = (0..feature_count)
            .map(|_| {
                let b = TAU * rng::uniform(&mut phase_rng);
                if b < TAU {
                    b
                } else {
                    0.0
                }
            })
            .collect();
        Ok(RksFeatureMap {
            bandwidth,
            seed,
            frequencies,
            phases,
        })
    }

    /// Reassembles a map from stored parts.
    pub fn from_parts(bandwidth: f64, seed: u64, frequencies: DMatrix<f64>, phases: Vec<f64>) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::DimensionInconsistency(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        if frequencies.nrows() == 0 || frequencies.ncols() == 0 {
            return Err(Error::DimensionInconsistency("empty frequency matrix".into()));
        }
        if phases.len() != frequencies.nrows() {
            return Err(Error::DimensionInconsistency(format!(
                "{} phases for {} frequency rows",
                phases.len(),
                frequencies.nrows()
            )));
        }
        if frequencies.iter().chain(&phases).any(|v| !v.is_finite()) {
            return Err(Error::DimensionInconsistency("non-finite feature parameters".into()));
        }
        Ok(RksFeatureMap {
            bandwidth,
            seed,
            frequencies,
            phases,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.frequencies.ncols()
    }

    pub fn feature_count(&self) -> usize {
        self.frequencies.nrows()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn frequencies(&self) -> &DMatrix<f64> {
        &self.frequencies
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn compute(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.feature_count()];
        self.compute_into(x, &mut out)?;
        Ok(out)
    }

    pub fn compute_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "feature map expects inputs of length {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        if out.len() != self.feature_count() {
            return Err(Error::invalid(format!(
                "output buffer has length {}, expected {}",
                out.len(),
                self.feature_count()
            )));
        }
        self.fill(x, out);
        Ok(())
    }

    pub(crate) fn fill(&self, x: &[f64], out: &mut [f64]) {
        let d = out.len();
        out.copy_from_slice(&self.phases);
        add_columns(out, self.frequencies.as_slice(), x);
        cos_scaled(out, (2.0 / d as f64).sqrt());
    }
}

// 1.5 * 2^52: adding and subtracting rounds to nearest.
const ROUND: f64 = 6755399441055744.0;
// pi/2 in three pieces; the first two have short mantissas so n * piece is exact.
const PIO2_1: f64 = 1.5707963267341256;
const PIO2_2: f64 = 6.077100506303966e-11;
const PIO2_3: f64 = 2.0222662487111665e-21;
const SIN: [f64; 6] = [
    1.5896230157654656e-10,
    -2.5050747762857807e-08,
    2.7557313621385722e-06,
    -0.0001984126982958954,
    0.008333333333322118,
    -0.1666666666666663,
];
const COS: [f64; 6] = [
    -1.1358536521387682e-11,
    2.087570084197473e-09,
    -2.755731417929674e-07,
    2.4801587288851704e-05,
    -0.0013888888888873056,
    0.041666666666666595,
];

// Within an ulp of libm for |x| below about 1e6. Only f64 arithmetic and
// selects, with no branches or integer conversions, so the loop vectorizes on
// any target and the AVX2 clone gives the same bits.
#[inline(always)]
fn cos(x: f64) -> f64 {
    let n = (x * std::f64::consts::FRAC_2_PI + ROUND) - ROUND;
    let r = ((x - n * PIO2_1) - n * PIO2_2) - n * PIO2_3;
    // quadrant in -2..=2
    let q = n - 4.0 * ((n * 0.25 + ROUND) - ROUND);
    let z = r * r;
    let ps = ((((SIN[0] * z + SIN[1]) * z + SIN[2]) * z + SIN[3]) * z + SIN[4]) * z + SIN[5];
    let pc = ((((COS[0] * z + COS[1]) * z + COS[2]) * z + COS[3]) * z + COS[4]) * z + COS[5];
    let s = r + r * z * ps;
    let c = 1.0 - 0.5 * z + z * z * pc;
    let v = if q == 1.0 || q == -1.0 { s } else { c };
    if q == 1.0 || q == 2.0 || q == -2.0 {
        -v
    } else {
        v
    }
}

// v <- scale * cos(v). libm branches on the argument's magnitude, and with
// fresh inputs every call those branches mispredict.
#[multiversion(targets("x86_64+avx2"))]
pub(crate) fn cos_scaled(v: &mut [f64], scale: f64) {
    for o in v.iter_mut() {
        *o = scale * cos(*o);
    }
}

// out += W x for column-major W; each input coordinate scales one
// contiguous column. Elementwise, so the AVX2 clone is bitwise-identical.
#[multiversion(targets("x86_64+avx2"))]
fn add_columns(out: &mut [f64], w: &[f64], x: &[f64]) {
    for (col, &xj) in w.chunks_exact(out.len()).zip(x) {
        for (o, &c) in out.iter_mut().zip(col) {
            *o += c * xj;
        }
    }
}
