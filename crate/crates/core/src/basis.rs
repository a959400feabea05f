//! B-spline bases on a closed interval and the finite set of candidate
//! functional directions searched during cross-validation.
//!
//! Knots are clamped: the two end knots carry multiplicity `order`, and the
//! `interior_knots` break points are equispaced inside the domain. A basis of
//! order `l` with `m` interior knots therefore has `l + m` functions.

use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::curves::{inner_product, Curve, Grid};
use crate::error::{FsimError, Result};

/// Order, interior knot count and domain of a clamped B-spline basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    order: usize,
    interior_knots: usize,
    domain: (f64, f64),
}

impl BasisSpec {
    pub fn new(order: usize, interior_knots: usize, min: f64, max: f64) -> Result<Self> {
        if order == 0 {
            return Err(FsimError::Parameter(
                "spline order must be at least 1".into(),
            ));
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(FsimError::Parameter(format!(
                "basis domain [{min}, {max}] must be a finite, non-empty interval"
            )));
        }
        Ok(Self {
            order,
            interior_knots,
            domain: (min, max),
        })
    }

    /// Basis whose domain is the range of `grid`.
    pub fn on_grid(order: usize, interior_knots: usize, grid: &Grid) -> Result<Self> {
        Self::new(order, interior_knots, grid.min(), grid.max())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn interior_knots(&self) -> usize {
        self.interior_knots
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Number of basis functions, `order + interior_knots`.
    pub fn dimension(&self) -> usize {
        self.order + self.interior_knots
    }

    /// Interior break points. Each knot is the convex combination
    /// `min * (1 - f) + max * f` with `f = i / (m + 1)`.
    pub fn interior_knot_values(&self) -> Vec<f64> {
        let (a, b) = self.domain;
        let m = self.interior_knots;
        (1..=m)
            .map(|i| {
                let f = i as f64 / (m + 1) as f64;
                a * (1.0 - f) + b * f
            })
            .collect()
    }

    /// Full clamped knot vector, of length `2 * order + interior_knots`.
    pub fn knot_vector(&self) -> Vec<f64> {
        let (a, b) = self.domain;
        let mut knots = Vec::with_capacity(2 * self.order + self.interior_knots);
        knots.extend(std::iter::repeat_n(a, self.order));
        knots.extend(self.interior_knot_values());
        knots.extend(std::iter::repeat_n(b, self.order));
        knots
    }

    fn check_point(&self, x: f64) -> Result<()> {
        let (min, max) = self.domain;
        if x.is_nan() || x < min || x > max {
            return Err(FsimError::Domain { point: x, min, max });
        }
        Ok(())
    }

    /// Values of all basis functions at `x`.
    pub fn values_at(&self, x: f64) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(spline_basis_values(&self.knot_vector(), self.order, x))
    }
}

/// Locates the knot span `mu` with `knots[mu] <= x < knots[mu + 1]`, closing the
/// last non-empty span on the right so the domain end is covered.
fn find_span(knots: &[f64], order: usize, x: f64) -> usize {
    let dim = knots.len() - order;
    let last = dim - 1;
    if x >= knots[last + 1] {
        return last;
    }
    let mut lo = order - 1;
    let mut hi = last;
    // binary search on knots[order-1..=dim]
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if knots[mid] <= x {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// Evaluates every B-spline of the given order on `knots` at `x` using the
/// triangular de Boor recurrence. `x` is assumed to lie in the knot range.
pub(crate) fn spline_basis_values(knots: &[f64], order: usize, x: f64) -> Vec<f64> {
    let dim = knots.len() - order;
    let mu = find_span(knots, order, x);
    let mut b = vec![0.0; order];
    let mut left = vec![0.0; order];
    let mut right = vec![0.0; order];
    b[0] = 1.0;
    for j in 1..order {
        left[j] = x - knots[mu + 1 - j];
        right[j] = knots[mu + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let term = b[r] / (right[r + 1] + left[j - r]);
            b[r] = saved + right[r + 1] * term;
            saved = left[j - r] * term;
        }
        b[j] = saved;
    }
    let mut out = vec![0.0; dim];
    let first = mu + 1 - order;
    out[first..first + order].copy_from_slice(&b);
    out
}

/// Value at `x` of the spline with `coefficients` on `knots`.
pub(crate) fn spline_value(knots: &[f64], order: usize, coefficients: &[f64], x: f64) -> f64 {
    let values = spline_basis_values(knots, order, x);
    let mut acc = 0.0;
    for (c, v) in coefficients.iter().zip(&values) {
        acc += c * v;
    }
    acc
}

/// Coefficients and knots of the derivative of a spline. The derivative of an
/// order-`l` spline is an order-`l - 1` spline on the knot vector with its
/// first and last knot removed.
pub(crate) fn differentiate_spline(
    knots: &[f64],
    order: usize,
    coefficients: &[f64],
) -> (Vec<f64>, usize, Vec<f64>) {
    debug_assert!(order >= 2);
    let k = (order - 1) as f64;
    let coeffs = coefficients
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let span = knots[i + order] - knots[i + 1];
            if span > 0.0 {
                k * (w[1] - w[0]) / span
            } else {
                0.0
            }
        })
        .collect();
    (knots[1..knots.len() - 1].to_vec(), order - 1, coeffs)
}

/// Basis matrix with one row per grid point and one column per basis function.
pub fn eval_basis(spec: &BasisSpec, grid: &Grid) -> Result<DMatrix<f64>> {
    let knots = spec.knot_vector();
    let dim = spec.dimension();
    let mut out = DMatrix::zeros(grid.len(), dim);
    for (i, &t) in grid.points().iter().enumerate() {
        spec.check_point(t)?;
        let row = spline_basis_values(&knots, spec.order, t);
        for (j, v) in row.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// A functional index `theta = sum_j alpha_j e_j` in a B-spline basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    spec: BasisSpec,
    coefficients: Vec<f64>,
}

impl Direction {
    pub fn new(spec: BasisSpec, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != spec.dimension() {
            return Err(FsimError::Dimension(format!(
                "direction has {} coefficients, basis dimension is {}",
                coefficients.len(),
                spec.dimension()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(FsimError::Parameter(
                "direction coefficients must be finite".into(),
            ));
        }
        Ok(Self { spec, coefficients })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Evaluates the direction at a single point.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        self.spec.check_point(t)?;
        Ok(spline_value(
            &self.spec.knot_vector(),
            self.spec.order,
            &self.coefficients,
            t,
        ))
    }

    /// Same direction with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            spec: self.spec.clone(),
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
        }
    }
}

fn combine_row(basis: &DMatrix<f64>, row: usize, coefficients: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (j, c) in coefficients.iter().enumerate() {
        acc += c * basis[(row, j)];
    }
    acc
}

fn combine(basis: &DMatrix<f64>, coefficients: &[f64]) -> Vec<f64> {
    (0..basis.nrows())
        .map(|i| combine_row(basis, i, coefficients))
        .collect()
}

/// The direction sampled on `grid`.
pub fn eval_direction(theta: &Direction, grid: &Arc<Grid>) -> Result<Curve> {
    let basis = eval_basis(&theta.spec, grid)?;
    Curve::new(grid.clone(), combine(&basis, &theta.coefficients))
}

/// Recipe for the candidate direction set.
#[derive(Debug, Clone)]
pub struct DirectionSetSpec {
    pub basis: BasisSpec,
    /// Seed coefficients each basis coefficient is drawn from.
    pub seeds: Vec<f64>,
    /// Point at which every candidate must be strictly positive.
    pub t0: f64,
    /// Grid carrying the quadrature used for normalisation.
    pub grid: Arc<Grid>,
}

impl DirectionSetSpec {
    /// Seeds {-1, 0, 1} with `t0` at the middle of the grid range.
    pub fn standard(order: usize, interior_knots: usize, grid: Arc<Grid>) -> Result<Self> {
        let basis = BasisSpec::on_grid(order, interior_knots, &grid)?;
        let t0 = 0.5 * (grid.min() + grid.max());
        Ok(Self {
            basis,
            seeds: vec![-1.0, 0.0, 1.0],
            t0,
            grid,
        })
    }

    fn validate(&self) -> Result<()> {
        let mut distinct = self.seeds.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(FsimError::Parameter(
                "the seed set needs at least two distinct values".into(),
            ));
        }
        if self.seeds.iter().any(|s| !s.is_finite()) {
            return Err(FsimError::Parameter(
                "seed coefficients must be finite".into(),
            ));
        }
        let (min, max) = self.basis.domain;
        if !(self.t0 >= min && self.t0 <= max) {
            return Err(FsimError::Domain {
                point: self.t0,
                min,
                max,
            });
        }
        if self.grid.min() < min || self.grid.max() > max {
            return Err(FsimError::Dimension(
                "quadrature grid extends beyond the basis domain".into(),
            ));
        }
        Ok(())
    }
}

/// Number of seed vectors enumerated before the positivity filter.
pub fn candidate_count(spec: &DirectionSetSpec) -> usize {
    let mut seeds = spec.seeds.clone();
    seeds.sort_by(f64::total_cmp);
    seeds.dedup();
    seeds.len().pow(spec.basis.dimension() as u32)
}

/// Builds the candidate directions.
///
/// Every vector of `seeds^d` is enumerated in lexicographic order (seeds sorted
/// ascending, first coefficient most significant). Candidates whose value at
/// `t0` is not strictly positive are dropped; the rest are divided by their
/// quadrature norm on the grid.
pub fn build_direction_set(spec: &DirectionSetSpec) -> Result<Vec<Direction>> {
    spec.validate()?;
    let mut seeds = spec.seeds.clone();
    seeds.sort_by(f64::total_cmp);
    seeds.dedup();

    let dim = spec.basis.dimension();
    let knots = spec.basis.knot_vector();
    let at_t0 = spline_basis_values(&knots, spec.basis.order, spec.t0);
    let basis = eval_basis(&spec.basis, &spec.grid)?;
    let total = seeds.len().pow(dim as u32);
    let base = seeds.len();

    let kept: Vec<Vec<f64>> = (0..total)
        .into_par_iter()
        .filter_map(|code| {
            let mut beta = vec![0.0; dim];
            let mut rest = code;
            for slot in beta.iter_mut().rev() {
                *slot = seeds[rest % base];
                rest /= base;
            }
            let mut value = 0.0;
            for (b, e) in beta.iter().zip(&at_t0) {
                value += b * e;
            }
            if !(value > 0.0) {
                return None;
            }
            let sampled = combine(&basis, &beta);
            let norm_sq = spec.grid.weighted_dot(&sampled, &sampled);
            if !(norm_sq > 0.0) {
                return None;
            }
            let norm = norm_sq.sqrt();
            Some(beta.into_iter().map(|b| b / norm).collect())
        })
        .collect();

    let mut seen = HashSet::with_capacity(kept.len());
    let mut out = Vec::with_capacity(kept.len());
    for alpha in kept {
        let key: Vec<u64> = alpha.iter().map(|a| a.to_bits()).collect();
        if seen.insert(key) {
            out.push(Direction {
                spec: spec.basis.clone(),
                coefficients: alpha,
            });
        }
    }
    if out.is_empty() {
        return Err(FsimError::EmptyDirectionSet(format!(
            "no candidate out of {total} is positive at t0 = {}",
            spec.t0
        )));
    }
    Ok(out)
}

/// Quadrature norm of a direction on `grid`.
pub fn direction_norm(theta: &Direction, grid: &Arc<Grid>) -> Result<f64> {
    let curve = eval_direction(theta, grid)?;
    Ok(inner_product(&curve, &curve)?.sqrt())
}
