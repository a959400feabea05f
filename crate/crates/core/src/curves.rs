//! Discretised curves, trapezoidal inner products and semi-metrics.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::{
    differentiate_spline, eval_basis, eval_direction, spline_basis_values, BasisSpec, Direction,
};
use crate::error::{FsimError, Result};

/// Strictly increasing abscissae shared by a family of curves, together with
/// their composite trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(FsimError::InvalidGrid(format!(
                "need at least two points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(FsimError::InvalidGrid("grid points must be finite".into()));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(FsimError::InvalidGrid(format!(
                "grid is not strictly increasing at index {}",
                i + 1
            )));
        }
        let p = points.len();
        let mut weights = vec![0.0; p];
        for i in 0..p - 1 {
            let half = 0.5 * (points[i + 1] - points[i]);
            weights[i] += half;
            weights[i + 1] += half;
        }
        Ok(Self { points, weights })
    }

    /// `p` equispaced points from `min` to `max`, both included.
    pub fn uniform(min: f64, max: f64, p: usize) -> Result<Self> {
        if p < 2 {
            return Err(FsimError::InvalidGrid(format!(
                "need at least two points, got {p}"
            )));
        }
        let last = (p - 1) as f64;
        let points = (0..p)
            .map(|i| {
                if i == p - 1 {
                    max
                } else {
                    min + (max - min) * (i as f64 / last)
                }
            })
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Trapezoidal approximation of the integral of `f * g`.
    pub(crate) fn weighted_dot(&self, f: &[f64], g: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((w, a), b) in self.weights.iter().zip(f).zip(g) {
            acc += w * a * b;
        }
        acc
    }
}

/// A real function observed on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FsimError::Dimension(format!(
                "curve has {} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FsimError::Parameter("curve values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` on `grid`.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || a.points == b.points
}

pub(crate) fn check_same_grid(a: &Curve, b: &Curve) -> Result<()> {
    if same_grid(&a.grid, &b.grid) {
        Ok(())
    } else {
        Err(FsimError::Dimension(format!(
            "curves live on different grids ({} and {} points)",
            a.grid.len(),
            b.grid.len()
        )))
    }
}

/// Composite trapezoid approximation of the integral of `f * g` over the grid.
pub fn inner_product(f: &Curve, g: &Curve) -> Result<f64> {
    check_same_grid(f, g)?;
    Ok(f.grid.weighted_dot(&f.values, &g.values))
}

/// How two curves are compared.
#[derive(Debug, Clone, PartialEq)]
pub enum SemiMetricKind {
    /// `|<theta, x1 - x2>|`.
    Projection(Direction),
    /// `sqrt(integral of (x1 - x2)^2)`.
    L2,
}

/// A semi-metric bound to a grid, ready to evaluate.
#[derive(Debug, Clone)]
pub enum PreparedMetric {
    Projection { grid: Arc<Grid>, theta: Vec<f64> },
    L2 { grid: Arc<Grid> },
}

impl SemiMetricKind {
    pub fn prepare(&self, grid: &Arc<Grid>) -> Result<PreparedMetric> {
        match self {
            SemiMetricKind::Projection(direction) => {
                let (min, max) = direction.spec().domain();
                if grid.min() < min || grid.max() > max {
                    return Err(FsimError::Dimension(format!(
                        "direction domain [{min}, {max}] does not cover the grid [{}, {}]",
                        grid.min(),
                        grid.max()
                    )));
                }
                let theta = eval_direction(direction, grid)?;
                Ok(PreparedMetric::Projection {
                    grid: grid.clone(),
                    theta: theta.values,
                })
            }
            SemiMetricKind::L2 => Ok(PreparedMetric::L2 { grid: grid.clone() }),
        }
    }
}

impl PreparedMetric {
    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            PreparedMetric::Projection { grid, .. } | PreparedMetric::L2 { grid } => grid,
        }
    }

    fn check(&self, x: &Curve) -> Result<()> {
        if same_grid(self.grid(), &x.grid) {
            Ok(())
        } else {
            Err(FsimError::Dimension(format!(
                "curve grid ({} points) differs from the metric grid ({} points)",
                x.grid.len(),
                self.grid().len()
            )))
        }
    }

    /// Semi-metric between two curves on the metric's grid.
    pub fn distance(&self, x1: &Curve, x2: &Curve) -> Result<f64> {
        self.check(x1)?;
        self.check(x2)?;
        let diff: Vec<f64> = x1
            .values
            .iter()
            .zip(&x2.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(match self {
            PreparedMetric::Projection { grid, theta } => grid.weighted_dot(theta, &diff).abs(),
            PreparedMetric::L2 { grid } => grid.weighted_dot(&diff, &diff).max(0.0).sqrt(),
        })
    }

    /// `<theta, x>` for a projection metric.
    pub fn project(&self, x: &Curve) -> Result<f64> {
        self.check(x)?;
        match self {
            PreparedMetric::Projection { grid, theta } => Ok(grid.weighted_dot(theta, &x.values)),
            PreparedMetric::L2 { .. } => Err(FsimError::Parameter(
                "the L2 semi-metric has no scalar projection".into(),
            )),
        }
    }

    pub fn is_projection(&self) -> bool {
        matches!(self, PreparedMetric::Projection { .. })
    }
}

pub fn semi_metric(kind: &SemiMetricKind, x1: &Curve, x2: &Curve) -> Result<f64> {
    check_same_grid(x1, x2)?;
    kind.prepare(&x1.grid)?.distance(x1, x2)
}

/// Symmetric matrix of semi-metric values, row-major `n x n`.
pub fn pairwise_distances(kind: &SemiMetricKind, curves: &[Curve]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = curves.first() else {
        return Ok(Vec::new());
    };
    for c in curves {
        check_same_grid(first, c)?;
    }
    let metric = kind.prepare(&first.grid)?;
    let n = curves.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    metric
                        .distance(&curves[i], &curves[j])
                        .expect("grids checked")
                })
                .collect()
        })
        .collect();
    let mut out = vec![vec![0.0; n]; n];
    for (i, row) in upper.into_iter().enumerate() {
        for (offset, d) in row.into_iter().enumerate() {
            let j = i + 1 + offset;
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    Ok(out)
}

/// Least-squares B-spline fit of `x`, differentiated `order` times and sampled
/// back on the curve's grid.
pub fn derivative_curve(x: &Curve, order: usize, spec: &BasisSpec) -> Result<Curve> {
    if !(1..=2).contains(&order) {
        return Err(FsimError::Parameter(format!(
            "derivative order must be 1 or 2, got {order}"
        )));
    }
    if spec.order() < order + 2 {
        return Err(FsimError::Parameter(format!(
            "a spline of order {} has no continuous derivative of order {order}",
            spec.order()
        )));
    }
    let coefficients = least_squares_coefficients(x, spec)?;
    let mut knots = spec.knot_vector();
    let mut spline_order = spec.order();
    let mut coeffs = coefficients;
    for _ in 0..order {
        let (k, o, c) = differentiate_spline(&knots, spline_order, &coeffs);
        knots = k;
        spline_order = o;
        coeffs = c;
    }
    let values = x
        .grid
        .points()
        .iter()
        .map(|&t| {
            let b = spline_basis_values(&knots, spline_order, t);
            let mut acc = 0.0;
            for (c, v) in coeffs.iter().zip(&b) {
                acc += c * v;
            }
            acc
        })
        .collect();
    Curve::new(x.grid.clone(), values)
}

fn least_squares_coefficients(x: &Curve, spec: &BasisSpec) -> Result<Vec<f64>> {
    let design: DMatrix<f64> = eval_basis(spec, &x.grid)?;
    let (p, d) = design.shape();
    if p < d {
        return Err(FsimError::Fit(format!(
            "{d} basis functions cannot be fitted from {p} grid points"
        )));
    }
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-10) {
        return Err(FsimError::Fit(format!(
            "design matrix is rank deficient (singular values {smin:e} .. {smax:e})"
        )));
    }
    let rhs = DVector::from_column_slice(&x.values);
    let solution = svd
        .solve(&rhs, 0.0)
        .map_err(|e| FsimError::Fit(e.to_string()))?;
    Ok(solution.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(p: usize) -> Arc<Grid> {
        Arc::new(Grid::uniform(0.0, 1.0, p).unwrap())
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(vec![0.0]).is_err());
        assert!(Grid::new(vec![0.0, 0.0]).is_err());
        assert!(Grid::new(vec![0.0, f64::NAN]).is_err());
        assert!(Grid::new(vec![0.0, 2.0, 1.0]).is_err());
        let g = Grid::uniform(0.0, 1.0, 100).unwrap();
        assert_eq!(g.max(), 1.0);
        let total: f64 = g.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_and_linear_integrands() {
        let g = unit(37);
        let one = Curve::from_fn(g.clone(), |_| 1.0).unwrap();
        let t = Curve::from_fn(g.clone(), |t| t).unwrap();
        assert!((inner_product(&one, &one).unwrap() - 1.0).abs() < 1e-14);
        assert!((inner_product(&t, &one).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn fourier_modes_are_orthogonal() {
        let g = unit(100);
        let c = Curve::from_fn(g.clone(), |t| (2.0 * PI * t).cos()).unwrap();
        let s = Curve::from_fn(g.clone(), |t| (4.0 * PI * t).sin()).unwrap();
        // a 10^6-point reference quadrature gives the same answer
        let fine = unit(1_000_000);
        let cf = Curve::from_fn(fine.clone(), |t| (2.0 * PI * t).cos()).unwrap();
        let sf = Curve::from_fn(fine, |t| (4.0 * PI * t).sin()).unwrap();
        assert!(inner_product(&cf, &sf).unwrap().abs() < 1e-10);
        assert!(inner_product(&c, &s).unwrap().abs() < 1e-10);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = Curve::from_fn(unit(10), |t| t).unwrap();
        let b = Curve::from_fn(unit(11), |t| t).unwrap();
        assert!(matches!(
            inner_product(&a, &b),
            Err(FsimError::Dimension(_))
        ));
        assert!(matches!(
            semi_metric(&SemiMetricKind::L2, &a, &b),
            Err(FsimError::Dimension(_))
        ));
        assert!(pairwise_distances(&SemiMetricKind::L2, &[a, b]).is_err());
    }

    fn constant_direction() -> Direction {
        Direction::new(BasisSpec::new(1, 0, 0.0, 1.0).unwrap(), vec![1.0]).unwrap()
    }

    #[test]
    fn projection_of_constant_difference() {
        let g = unit(25);
        let x1 = Curve::from_fn(g.clone(), |t| t * t + 3.0).unwrap();
        let x2 = Curve::from_fn(g.clone(), |t| t * t + 0.5).unwrap();
        let kind = SemiMetricKind::Projection(constant_direction());
        assert!((semi_metric(&kind, &x1, &x2).unwrap() - 2.5).abs() < 1e-13);
        assert_eq!(semi_metric(&kind, &x1, &x1).unwrap(), 0.0);
        assert_eq!(semi_metric(&SemiMetricKind::L2, &x2, &x2).unwrap(), 0.0);
    }

    #[test]
    fn projection_matches_explicit_weighted_sum() {
        let g = Arc::new(Grid::new(vec![0.0, 0.1, 0.35, 0.5, 0.8, 1.0]).unwrap());
        let theta = Direction::new(
            BasisSpec::new(2, 1, 0.0, 1.0).unwrap(),
            vec![0.4, 1.1, -0.3],
        )
        .unwrap();
        let curves: Vec<Curve> = [
            vec![1.0, 2.0, 0.5, -1.0, 0.0, 3.0],
            vec![0.3, 0.2, 0.1, 0.0, -0.1, -0.2],
            vec![5.0, 4.0, 4.5, 4.2, 3.0, 2.0],
        ]
        .into_iter()
        .map(|v| Curve::new(g.clone(), v).unwrap())
        .collect();
        // theta sampled by hand: piecewise linear hat functions with knot at 0.5
        let th: Vec<f64> = g
            .points()
            .iter()
            .map(|&t| {
                if t < 0.5 {
                    0.4 * (1.0 - 2.0 * t) + 1.1 * (2.0 * t)
                } else {
                    1.1 * (2.0 - 2.0 * t) + (-0.3) * (2.0 * t - 1.0)
                }
            })
            .collect();
        let pts = g.points();
        let kind = SemiMetricKind::Projection(theta);
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = 0.0;
                for k in 0..pts.len() - 1 {
                    let h = pts[k + 1] - pts[k];
                    let fa = th[k] * (curves[a].values()[k] - curves[b].values()[k]);
                    let fb = th[k + 1] * (curves[a].values()[k + 1] - curves[b].values()[k + 1]);
                    acc += 0.5 * h * (fa + fb);
                }
                let got = semi_metric(&kind, &curves[a], &curves[b]).unwrap();
                assert!(
                    (got - acc.abs()).abs() < 1e-12,
                    "{a},{b}: {got} vs {}",
                    acc.abs()
                );
            }
        }
    }

    #[test]
    fn orthogonal_difference_has_zero_projection_distance() {
        let g = unit(101);
        let kind = SemiMetricKind::Projection(constant_direction());
        let x1 = Curve::from_fn(g.clone(), |t| 1.0 + (2.0 * PI * t).cos()).unwrap();
        let x2 = Curve::from_fn(g.clone(), |_| 1.0).unwrap();
        assert_ne!(x1, x2);
        assert!(semi_metric(&kind, &x1, &x2).unwrap() < 1e-14);
        assert!(semi_metric(&SemiMetricKind::L2, &x1, &x2).unwrap() > 0.5);
    }

    #[test]
    fn pairwise_trivial_cases() {
        let g = unit(12);
        let c = Curve::from_fn(g.clone(), |t| t.sin()).unwrap();
        assert_eq!(
            pairwise_distances(&SemiMetricKind::L2, std::slice::from_ref(&c)).unwrap(),
            vec![vec![0.0]]
        );
        let d = Curve::from_fn(g, |t| t.cos()).unwrap();
        let m = pairwise_distances(&SemiMetricKind::L2, &[c.clone(), d, c]).unwrap();
        assert_eq!(m[0][2], 0.0);
        assert!(m[0][1] > 0.0);
        assert!(pairwise_distances(&SemiMetricKind::L2, &[])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn derivative_of_square() {
        let g = unit(201);
        let x = Curve::from_fn(g.clone(), |t| t * t).unwrap();
        let spec = BasisSpec::new(4, 8, 0.0, 1.0).unwrap();
        let dx = derivative_curve(&x, 1, &spec).unwrap();
        for (t, v) in g.points().iter().zip(dx.values()) {
            assert!((v - 2.0 * t).abs() < 1e-6, "{t}: {v}");
        }
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = unit(50);
        let x = Curve::from_fn(g.clone(), |_| 4.2).unwrap();
        let spec = BasisSpec::new(4, 5, 0.0, 1.0).unwrap();
        let dx = derivative_curve(&x, 1, &spec).unwrap();
        assert!(dx.values().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn second_derivative_of_cube() {
        let g = unit(201);
        let x = Curve::from_fn(g.clone(), |t| t * t * t).unwrap();
        let spec = BasisSpec::new(4, 8, 0.0, 1.0).unwrap();
        let d2 = derivative_curve(&x, 2, &spec).unwrap();
        for (t, v) in g.points().iter().zip(d2.values()) {
            if *t > 0.1 && *t < 0.9 {
                assert!((v - 6.0 * t).abs() < 1e-4, "{t}: {v}");
            }
        }
    }

    #[test]
    fn derivative_errors() {
        let g = unit(8);
        let x = Curve::from_fn(g.clone(), |t| t).unwrap();
        let too_many = BasisSpec::new(4, 10, 0.0, 1.0).unwrap();
        assert!(matches!(
            derivative_curve(&x, 1, &too_many),
            Err(FsimError::Fit(_))
        ));
        let low = BasisSpec::new(3, 1, 0.0, 1.0).unwrap();
        assert!(matches!(
            derivative_curve(&x, 2, &low),
            Err(FsimError::Parameter(_))
        ));
        let spec = BasisSpec::new(4, 1, 0.0, 1.0).unwrap();
        assert!(derivative_curve(&x, 3, &spec).is_err());
    }
}
