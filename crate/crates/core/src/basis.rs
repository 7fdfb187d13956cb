//! Tensor-product cosine basis on the unit cube.
//!
//! The one-dimensional family is `phi_0(u) = 1`, `phi_j(u) = sqrt(2) cos(pi j u)`,
//! which is orthonormal on `[0, 1]` and indexed by non-negative integers. A
//! multi-index `alpha` selects the product `prod_i phi_{alpha_i}(x_i)`.
//!
//! Functions are only ever seen through [`FunctionObservation`]s. They are
//! summarized by their empirical projection coefficients ([`project`]) over a
//! finite [`BasisIndexSet`], usually a Euclidean ball `M_t` chosen by held-out
//! cross-validation ([`select_truncation`]).

use std::cmp::Ordering;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use multiversion::multiversion;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier recorded in model files for the one-dimensional family.
pub const BASIS_TAG: &str = "cosine";

/// One-dimensional basis function `phi_j(u)`.
#[inline]
pub fn phi_1d(j: u32, u: f64) -> f64 {
    if j == 0 {
        1.0
    } else {
        SQRT_2 * (PI * j as f64 * u).cos()
    }
}

/// A multi-index of non-negative entries, ordered lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(dimension: usize) -> Self {
        MultiIndex(vec![0; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn norm_sq(&self) -> u64 {
        self.0.iter().map(|&a| (a as u64) * (a as u64)).sum()
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Sobolev ellipsoid parameters `(nu, gamma, A)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevSpec {
    pub nu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub amplitude: f64,
}

impl SobolevSpec {
    pub fn new(nu: Vec<f64>, gamma: Vec<f64>, amplitude: f64) -> Result<Self> {
        if nu.is_empty() || nu.len() != gamma.len() {
            return Err(Error::invalid(format!(
                "nu and gamma must be non-empty and of equal length (got {} and {})",
                nu.len(),
                gamma.len()
            )));
        }
        let positive = |v: &f64| v.is_finite() && *v > 0.0;
        if !nu.iter().all(positive) || !gamma.iter().all(positive) || !positive(&amplitude) {
            return Err(Error::invalid(
                "Sobolev parameters must be finite and strictly positive",
            ));
        }
        Ok(SobolevSpec { nu, gamma, amplitude })
    }

    /// `nu = gamma = 1` in every coordinate.
    pub fn isotropic(dimension: usize, amplitude: f64) -> Result<Self> {
        Self::new(vec![1.0; dimension], vec![1.0; dimension], amplitude)
    }

    pub fn dimension(&self) -> usize {
        self.nu.len()
    }

    /// `kappa_alpha^2 = sum_i (nu_i |alpha_i|)^(2 gamma_i)`.
    pub fn kappa_sq(&self, alpha: &MultiIndex) -> f64 {
        alpha
            .entries()
            .iter()
            .zip(self.nu.iter().zip(&self.gamma))
            .map(|(&a, (&nu, &g))| (nu * a as f64).powf(2.0 * g))
            .sum()
    }

    pub fn kappa(&self, alpha: &MultiIndex) -> f64 {
        self.kappa_sq(alpha).sqrt()
    }

    /// `1 / gamma^{-1}` where `gamma^{-1} = sum_i 1 / gamma_i`.
    pub fn gamma_inv(&self) -> f64 {
        self.gamma.iter().map(|g| 1.0 / g).sum()
    }
}

/// How an index set was built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IndexRule {
    EuclideanBall { radius: f64 },
    KappaBall { spec: SobolevSpec, radius: f64 },
    Explicit,
}

/// A finite, lexicographically ordered set of multi-indices of one dimension.
#[derive(Clone, Debug, Serialize)]
pub struct BasisIndexSet {
    dimension: usize,
    indices: Vec<MultiIndex>,
    rule: IndexRule,
}

impl PartialEq for BasisIndexSet {
    // The construction rule is provenance only.
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension && self.indices == other.indices
    }
}

impl BasisIndexSet {
    /// Builds a set from explicit indices, sorting them and rejecting
    /// duplicates or mixed dimensions.
    pub fn from_indices(dimension: usize, mut indices: Vec<MultiIndex>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("index set dimension must be positive"));
        }
        if let Some(bad) = indices.iter().find(|a| a.dimension() != dimension) {
            return Err(Error::invalid(format!(
                "multi-index {bad} has length {} but the set has dimension {dimension}",
                bad.dimension()
            )));
        }
        indices.sort();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate multi-index {}", w[0])));
        }
        Ok(BasisIndexSet {
            dimension,
            indices,
            rule: IndexRule::Explicit,
        })
    }

    pub(crate) fn with_rule(mut self, rule: IndexRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn rule(&self) -> &IndexRule {
        &self.rule
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Largest entry used along each axis.
    pub fn max_per_axis(&self) -> Vec<u32> {
        let mut max = vec![0u32; self.dimension];
        for alpha in &self.indices {
            for (m, &a) in max.iter_mut().zip(alpha.entries()) {
                *m = (*m).max(a);
            }
        }
        max
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.indices.binary_search(alpha).ok()
    }
}

/// All non-negative multi-indices with `||alpha||_2 <= radius`.
pub fn enumerate_ball(dimension: usize, radius: f64) -> Result<BasisIndexSet> {
    if dimension == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("radius must be finite and >= 0, got {radius}")));
    }
    let limit = radius * radius * (1.0 + 1e-12);
    let bound = radius.floor() as u32;
    let indices = enumerate_box(&vec![bound; dimension], |alpha| alpha.norm_sq() as f64 <= limit);
    Ok(BasisIndexSet {
        dimension,
        indices,
        rule: IndexRule::EuclideanBall { radius },
    })
}

/// All non-negative multi-indices with `kappa_alpha(nu, gamma) <= radius`.
pub fn enumerate_kappa_ball(spec: &SobolevSpec, radius: f64) -> Result<BasisIndexSet> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("radius must be finite and >= 0, got {radius}")));
    }
    // |alpha_i| <= nu_min^(-gamma_min / gamma_i) t^(1 / gamma_i), where
    // (nu_min, gamma_min) minimizes nu_i^(2 gamma_i).
    let lam = (0..spec.dimension())
        .min_by(|&a, &b| {
            let fa = spec.nu[a].powf(2.0 * spec.gamma[a]);
            let fb = spec.nu[b].powf(2.0 * spec.gamma[b]);
            fa.partial_cmp(&fb).unwrap_or(Ordering::Equal)
        })
        .expect("spec has positive dimension");
    let (nu_l, gamma_l) = (spec.nu[lam], spec.gamma[lam]);
    let bounds: Vec<u32> = spec
        .gamma
        .iter()
        .map(|&g| {
            let b = nu_l.powf(-gamma_l / g) * radius.powf(1.0 / g);
            (b * (1.0 + 1e-12)).floor() as u32
        })
        .collect();
    let limit = radius * radius * (1.0 + 1e-12);
    let indices = enumerate_box(&bounds, |alpha| spec.kappa_sq(alpha) <= limit);
    Ok(BasisIndexSet {
        dimension: spec.dimension(),
        indices,
        rule: IndexRule::KappaBall {
            spec: spec.clone(),
            radius,
        },
    })
}

// Odometer over [0, bounds_i] with the last axis fastest, which yields
// lexicographic order directly.
fn enumerate_box(bounds: &[u32], keep: impl Fn(&MultiIndex) -> bool) -> Vec<MultiIndex> {
    let d = bounds.len();
    let mut current = vec![0u32; d];
    let mut out = Vec::new();
    loop {
        let alpha = MultiIndex(current.clone());
        if keep(&alpha) {
            out.push(alpha);
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if current[axis] < bounds[axis] {
                current[axis] += 1;
                current[axis + 1..].iter_mut().for_each(|c| *c = 0);
                break;
            }
        }
    }
}

/// `phi_alpha(x) = prod_i phi_{alpha_i}(x_i)`.
pub fn eval_basis(alpha: &MultiIndex, x: &[f64]) -> Result<f64> {
    if alpha.dimension() != x.len() {
        return Err(Error::invalid(format!(
            "multi-index has dimension {} but point has dimension {}",
            alpha.dimension(),
            x.len()
        )));
    }
    Ok(alpha.entries().iter().zip(x).map(|(&a, &u)| phi_1d(a, u)).product())
}

/// Evaluates every basis function of an index set at one point.
///
/// The per-axis cosines come from the Chebyshev recurrence
/// `cos((j+1)t) = 2 cos(t) cos(jt) - cos((j-1)t)`, so one point costs one
/// `cos` per axis plus `O(max index + |set| d)` arithmetic.
pub struct BasisEvaluator<'a> {
    set: &'a BasisIndexSet,
    offsets: Vec<usize>,
    table: Vec<f64>,
}

impl<'a> BasisEvaluator<'a> {
    pub fn new(set: &'a BasisIndexSet) -> Self {
        let max = set.max_per_axis();
        let mut offsets = Vec::with_capacity(max.len());
        let mut total = 0;
        for &m in &max {
            offsets.push(total);
            total += m as usize + 1;
        }
        BasisEvaluator {
            set,
            offsets,
            table: vec![0.0; total],
        }
    }

    /// Writes `phi_alpha(x)` for every alpha in set order into `out`.
    /// `x` must have the set's dimension.
    pub fn eval_into(&mut self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.set.dimension);
        debug_assert_eq!(out.len(), self.set.len());
        let d = x.len();
        for axis in 0..d {
            let start = self.offsets[axis];
            let end = if axis + 1 < d {
                self.offsets[axis + 1]
            } else {
                self.table.len()
            };
            let row = &mut self.table[start..end];
            row[0] = 1.0;
            if row.len() > 1 {
                let c1 = (PI * x[axis]).cos();
                let mut prev = 1.0;
                let mut cur = c1;
                row[1] = SQRT_2 * c1;
                for slot in row.iter_mut().skip(2) {
                    let next = 2.0 * c1 * cur - prev;
                    prev = cur;
                    cur = next;
                    *slot = SQRT_2 * next;
                }
            }
        }
        if d == 1 {
            for (o, alpha) in out.iter_mut().zip(&self.set.indices) {
                *o = self.table[alpha.0[0] as usize];
            }
        } else {
            for (o, alpha) in out.iter_mut().zip(&self.set.indices) {
                let mut v = 1.0;
                for (axis, &a) in alpha.0.iter().enumerate() {
                    v *= self.table[self.offsets[axis] + a as usize];
                }
                *o = v;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationKind {
    NoisyEvaluations,
    DensitySample,
}

/// Noisy point evaluations of a function, or an i.i.d. sample from a density,
/// on `[0, 1]^d`. Points are stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionObservation {
    kind: ObservationKind,
    dimension: usize,
    points: Vec<f64>,
    values: Option<Vec<f64>>,
}

impl FunctionObservation {
    pub fn noisy(dimension: usize, points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::build(ObservationKind::NoisyEvaluations, dimension, points, Some(values))
    }

    pub fn density_sample(dimension: usize, points: Vec<f64>) -> Result<Self> {
        Self::build(ObservationKind::DensitySample, dimension, points, None)
    }

    /// Noisy evaluations of a one-dimensional function.
    pub fn noisy_1d(points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::noisy(1, points, values)
    }

    fn build(kind: ObservationKind, dimension: usize, points: Vec<f64>, values: Option<Vec<f64>>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("observation dimension must be positive"));
        }
        if points.is_empty() {
            return Err(Error::invalid("observation has no points"));
        }
        if points.len() % dimension != 0 {
            return Err(Error::invalid(format!(
                "{} coordinates do not form points of dimension {dimension}",
                points.len()
            )));
        }
        if let Some(j) = points.iter().position(|u| !(0.0..=1.0).contains(u)) {
            return Err(Error::invalid(format!(
                "point {} has coordinate {} outside [0, 1]",
                j / dimension,
                points[j]
            )));
        }
        let n = points.len() / dimension;
        if let Some(values) = &values {
            if values.len() != n {
                return Err(Error::invalid(format!("{n} points but {} values", values.len())));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("observation values must be finite"));
            }
        }
        Ok(FunctionObservation {
            kind,
            dimension,
            points,
            values,
        })
    }

    pub fn kind(&self) -> ObservationKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dimension..(j + 1) * self.dimension]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dimension)
    }

    pub fn flat_points(&self) -> &[f64] {
        &self.points
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    /// Value attached to point `j`; identically 1 for density samples.
    #[inline]
    pub fn value(&self, j: usize) -> f64 {
        match &self.values {
            Some(v) => v[j],
            None => 1.0,
        }
    }
}

/// Projection coefficients over an index set, in set order.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector {
    index_set: Arc<BasisIndexSet>,
    coefficients: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(index_set: Arc<BasisIndexSet>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != index_set.len() {
            return Err(Error::invalid(format!(
                "{} coefficients for an index set of size {}",
                coefficients.len(),
                index_set.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(CoefficientVector {
            index_set,
            coefficients,
        })
    }

    pub fn zeros(index_set: Arc<BasisIndexSet>) -> Self {
        let coefficients = vec![0.0; index_set.len()];
        CoefficientVector {
            index_set,
            coefficients,
        }
    }

    pub fn index_set(&self) -> &Arc<BasisIndexSet> {
        &self.index_set
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn same_index_set(&self, other: &CoefficientVector) -> bool {
        Arc::ptr_eq(&self.index_set, &other.index_set) || self.index_set == other.index_set
    }
}

/// Empirical projection `c_alpha = (1/n) sum_j y_j phi_alpha(u_j)`.
///
/// Density samples use `y_j = 1`, giving the orthogonal-series density
/// estimate.
pub fn project(obs: &FunctionObservation, index_set: &Arc<BasisIndexSet>) -> Result<CoefficientVector> {
    if obs.is_empty() {
        return Err(Error::invalid("cannot project an empty observation"));
    }
    if obs.dimension() != index_set.dimension() {
        return Err(Error::invalid(format!(
            "observation has dimension {} but index set has dimension {}",
            obs.dimension(),
            index_set.dimension()
        )));
    }
    let coefficients = project_raw(obs, index_set);
    Ok(CoefficientVector {
        index_set: Arc::clone(index_set),
        coefficients,
    })
}

// Points are processed in blocks so that the per-axis cosine recurrences and
// the per-index products run over contiguous arrays of block length.
const PROJECT_BLOCK: usize = 64;

const ONES: [f64; PROJECT_BLOCK] = [1.0; PROJECT_BLOCK];

// cos(pi x) along one axis of a block of points, with the branch-free cosine.
fn cos_pi_axis(block: &[f64], d: usize, axis: usize, out: &mut [f64]) {
    for (o, x) in out.iter_mut().zip(block.chunks_exact(d)) {
        *o = PI * x[axis];
    }
    crate::features::cos_scaled(out, 1.0);
}

pub(crate) fn project_raw(obs: &FunctionObservation, index_set: &BasisIndexSet) -> Vec<f64> {
    const B: usize = PROJECT_BLOCK;
    let d = index_set.dimension;
    let max = index_set.max_per_axis();
    let mut offsets = Vec::with_capacity(d);
    let mut rows = 0;
    for &m in &max {
        offsets.push(rows);
        rows += m as usize + 1;
    }
    // phi_alpha = sqrt(2)^(nonzero entries) * prod_i T_{alpha_i}(cos(pi x_i))
    let scales: Vec<f64> = index_set
        .indices
        .iter()
        .map(|a| SQRT_2.powi(a.0.iter().filter(|&&k| k > 0).count() as i32))
        .collect();
    let mut table = vec![0.0; rows * B];
    let mut weight = [0.0; B];
    let mut prod = [0.0; B];
    let mut sums = vec![0.0; index_set.len()];
    let points = obs.flat_points();
    let n = obs.len();
    for start in (0..n).step_by(B) {
        let m = B.min(n - start);
        let block = &points[start * d..(start + m) * d];
        match obs.values() {
            Some(v) => weight[..m].copy_from_slice(&v[start..start + m]),
            None => weight[..m].fill(1.0),
        }
        for axis in 0..d {
            let count = max[axis] as usize + 1;
            let axis_rows = &mut table[offsets[axis] * B..(offsets[axis] + count) * B];
            axis_rows[..m].fill(1.0);
            if count > 1 {
                cos_pi_axis(block, d, axis, &mut axis_rows[B..B + m]);
            }
            for k in 2..count {
                let (done, next) = axis_rows.split_at_mut(k * B);
                let c1 = &done[B..B + m];
                let older = &done[(k - 2) * B..(k - 2) * B + m];
                let last = &done[(k - 1) * B..(k - 1) * B + m];
                for (((t, &c), &p1), &p2) in next[..m].iter_mut().zip(c1).zip(last).zip(older) {
                    *t = 2.0 * c * p1 - p2;
                }
            }
        }
        for ((acc, alpha), &scale) in sums.iter_mut().zip(&index_set.indices).zip(&scales) {
            // The last factor is folded into the reduction, which keeps the
            // block sum off a single serial add chain.
            let mut factors = alpha
                .0
                .iter()
                .enumerate()
                .filter(|&(_, &k)| k > 0)
                .map(|(axis, &k)| (offsets[axis] + k as usize) * B);
            let block_sum = match factors.next() {
                None => dot(&weight[..m], &ONES[..m]),
                Some(first) => {
                    let mut last = first;
                    prod[..m].copy_from_slice(&weight[..m]);
                    for row in factors {
                        for (p, &t) in prod[..m].iter_mut().zip(&table[last..last + m]) {
                            *p *= t;
                        }
                        last = row;
                    }
                    dot(&prod[..m], &table[last..last + m])
                }
            };
            *acc += scale * block_sum;
        }
    }
    let n = n as f64;
    sums.iter_mut().for_each(|c| *c /= n);
    sums
}

/// `sum_alpha c_alpha phi_alpha(x)`.
pub fn reconstruct(coeffs: &CoefficientVector, x: &[f64]) -> Result<f64> {
    if x.len() != coeffs.index_set.dimension() {
        return Err(Error::invalid(format!(
            "point has dimension {} but coefficients have dimension {}",
            x.len(),
            coeffs.index_set.dimension()
        )));
    }
    let mut eval = BasisEvaluator::new(&coeffs.index_set);
    let mut row = vec![0.0; coeffs.len()];
    eval.eval_into(x, &mut row);
    Ok(dot(&row, &coeffs.coefficients))
}

/// Euclidean distance between two coefficient vectors over the same set,
/// which equals the L2 distance of the reconstructed functions.
pub fn coeff_l2_distance(a: &CoefficientVector, b: &CoefficientVector) -> Result<f64> {
    if !a.same_index_set(b) {
        return Err(Error::invalid("coefficient vectors are over different index sets"));
    }
    Ok(l2_distance(&a.coefficients, &b.coefficients))
}

// Both kernels get an AVX2 clone picked at runtime. Rust never contracts
// into FMA and the lane order below is explicit, so every clone returns
// bitwise-identical results.
#[multiversion(targets("x86_64+avx2"))]
pub(crate) fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    lanes(a, b, |x, y| (x - y) * (x - y)).sqrt()
}

#[multiversion(targets("x86_64+avx2"))]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    lanes(a, b, |x, y| x * y)
}

// Sixteen independent partial sums: enough parallel add chains to hide add
// latency once vectorized. The summation order is fixed by the slice length
// alone.
const LANES: usize = 16;

#[inline(always)]
fn lanes(a: &[f64], b: &[f64], term: impl Fn(f64, f64) -> f64) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..LANES {
            acc[k] += term(x[k], y[k]);
        }
    }
    let mut tail = 0.0;
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += term(x, y);
    }
    let mut width = LANES;
    while width > 1 {
        width /= 2;
        for k in 0..width {
            acc[k] += acc[k + width];
        }
    }
    acc[0] + tail
}

/// Truncation radius `t = C n^(1 / (2 + gamma^{-1}))`.
pub fn rate_radius(n: usize, gamma_inv: f64, constant: f64) -> f64 {
    constant * (n as f64).powf(1.0 / (2.0 + gamma_inv))
}

/// Chooses the Euclidean-ball radius that minimizes K-fold held-out squared
/// error of the truncated reconstruction. Point `j` is held out in fold
/// `j mod folds`. Ties go to the smaller radius.
pub fn select_truncation(obs: &FunctionObservation, candidate_radii: &[f64], folds: usize) -> Result<f64> {
    if candidate_radii.is_empty() {
        return Err(Error::invalid("no candidate radii"));
    }
    if candidate_radii.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::invalid("candidate radii must be sorted ascending"));
    }
    if folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {folds}")));
    }
    if obs.kind() != ObservationKind::NoisyEvaluations {
        return Err(Error::invalid(
            "truncation selection needs noisy evaluations, not a density sample",
        ));
    }
    let n = obs.len();
    if n < folds {
        return Err(Error::invalid(format!(
            "{n} observation points cannot be split into {folds} folds"
        )));
    }
    let largest = *candidate_radii.last().expect("non-empty");
    let full = enumerate_ball(obs.dimension(), largest)?;
    let m = full.len();
    let norms: Vec<f64> = full.indices().iter().map(|a| a.norm_sq() as f64).collect();

    let mut rows = vec![0.0; n * m];
    let mut eval = BasisEvaluator::new(&full);
    for (j, x) in obs.points().enumerate() {
        eval.eval_into(x, &mut rows[j * m..(j + 1) * m]);
    }

    let mut fold_sums = vec![0.0; folds * m];
    let mut fold_counts = vec![0usize; folds];
    let mut total = vec![0.0; m];
    for j in 0..n {
        let k = j % folds;
        let y = obs.value(j);
        fold_counts[k] += 1;
        let row = &rows[j * m..(j + 1) * m];
        for i in 0..m {
            fold_sums[k * m + i] += y * row[i];
            total[i] += y * row[i];
        }
    }
    // Training-fold coefficients for each fold.
    let mut train = vec![0.0; folds * m];
    for k in 0..folds {
        let count = (n - fold_counts[k]) as f64;
        for i in 0..m {
            train[k * m + i] = (total[i] - fold_sums[k * m + i]) / count;
        }
    }

    let mut best = (f64::INFINITY, candidate_radii[0]);
    for &t in candidate_radii {
        let limit = t * t * (1.0 + 1e-12);
        let active: Vec<usize> = (0..m).filter(|&i| norms[i] <= limit).collect();
        let mut err = 0.0;
        for j in 0..n {
            let k = j % folds;
            let row = &rows[j * m..(j + 1) * m];
            let coeffs = &train[k * m..(k + 1) * m];
            let fit: f64 = active.iter().map(|&i| coeffs[i] * row[i]).sum();
            let r = obs.value(j) - fit;
            err += r * r;
        }
        let err = err / n as f64;
        if err < best.0 {
            best = (err, t);
        }
    }
    Ok(best.1)
}
