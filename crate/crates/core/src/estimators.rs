//! Kernel and k-nearest-neighbour smoothers over a semi-metric.
//!
//! Both smoothers are weighted averages of training responses,
//! `sum_i Y_i K(d_i / h) / sum_i K(d_i / h)`. The kernel smoother uses a fixed
//! bandwidth `h`; the kNN smoother sets `h` to the distance of the `(k+1)`-th
//! nearest training curve, so that exactly `k` curves fall strictly inside the
//! ball when there are no ties.

use std::cmp::Ordering;
use std::sync::Arc;

use crate::curves::{same_grid, Curve, Grid, PreparedMetric, SemiMetricKind};
use crate::error::{FsimError, Result};
use crate::selection::FittedFsim;

/// Kernel profile, supported on `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// `0.75 * (1 - u^2)` on `[0, 1)`.
    Epanechnikov,
    /// `1` on `[0, 1)`.
    Indicator,
}

impl KernelKind {
    #[inline]
    pub fn weight(self, u: f64) -> f64 {
        if !(0.0..1.0).contains(&u) {
            return 0.0;
        }
        match self {
            KernelKind::Epanechnikov => 0.75 * (1.0 - u * u),
            KernelKind::Indicator => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Epanechnikov => "epanechnikov",
            KernelKind::Indicator => "indicator",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(KernelKind::Epanechnikov),
            "indicator" => Ok(KernelKind::Indicator),
            other => Err(FsimError::Parameter(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Paired curves and scalar responses.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    grid: Arc<Grid>,
    curves: Vec<Curve>,
    responses: Vec<f64>,
}

impl TrainingSet {
    pub fn new(curves: Vec<Curve>, responses: Vec<f64>) -> Result<Self> {
        if curves.len() != responses.len() {
            return Err(FsimError::Dimension(format!(
                "{} curves but {} responses",
                curves.len(),
                responses.len()
            )));
        }
        if curves.len() < 2 {
            return Err(FsimError::Parameter(format!(
                "a training set needs at least two observations, got {}",
                curves.len()
            )));
        }
        if responses.iter().any(|y| !y.is_finite()) {
            return Err(FsimError::Parameter("responses must be finite".into()));
        }
        let grid = curves[0].grid().clone();
        if let Some(i) = curves.iter().position(|c| !same_grid(c.grid(), &grid)) {
            return Err(FsimError::Dimension(format!(
                "curve {i} is not on the common grid"
            )));
        }
        Ok(Self {
            grid,
            curves,
            responses,
        })
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    /// Same curves with new responses.
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Self> {
        Self::new(self.curves.clone(), responses)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(FsimError::Parameter(format!(
                "row index {bad} out of range for {} rows",
                self.len()
            )));
        }
        Self::new(
            indices.iter().map(|&i| self.curves[i].clone()).collect(),
            indices.iter().map(|&i| self.responses[i]).collect(),
        )
    }

    /// The set with observation `j` removed.
    pub fn without(&self, j: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != j).collect();
        self.subset(&keep)
    }
}

/// Smoothing parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tuning {
    Bandwidth(f64),
    Neighbours(usize),
}

impl Tuning {
    /// Numeric value, `h` or `k`.
    pub fn value(self) -> f64 {
        match self {
            Tuning::Bandwidth(h) => h,
            Tuning::Neighbours(k) => k as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmootherConfig {
    pub kernel: KernelKind,
    pub semimetric: SemiMetricKind,
    pub tuning: Tuning,
}

/// A smoothed value and whether a degenerate-denominator fallback produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothed {
    pub value: f64,
    pub degenerate: bool,
}

/// Training rows sorted by distance to a query point, ties broken by row index.
pub(crate) type Neighbourhood = Vec<(f64, usize)>;

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

pub(crate) fn sort_neighbourhood(mut items: Neighbourhood) -> Neighbourhood {
    items.sort_unstable_by(by_distance_then_index);
    items
}

/// Weighted average over a sorted neighbourhood.
pub(crate) fn smooth_sorted(
    neighbours: &[(f64, usize)],
    responses: &[f64],
    kernel: KernelKind,
    tuning: Tuning,
) -> Result<Smoothed> {
    if neighbours.is_empty() {
        return Err(FsimError::Parameter(
            "cannot smooth over an empty sample".into(),
        ));
    }
    let h = match tuning {
        Tuning::Bandwidth(h) => {
            if !(h > 0.0 && h.is_finite()) {
                return Err(FsimError::Parameter(format!(
                    "bandwidth must be positive and finite, got {h}"
                )));
            }
            h
        }
        Tuning::Neighbours(k) => {
            if k == 0 || k >= neighbours.len() {
                return Err(FsimError::Parameter(format!(
                    "k = {k} needs 1 <= k <= {} for a pool of {} curves",
                    neighbours.len().saturating_sub(1),
                    neighbours.len()
                )));
            }
            let radius = neighbours[k].0;
            if radius == 0.0 {
                let mut sum = 0.0;
                let mut count = 0usize;
                for &(d, i) in neighbours.iter().take_while(|(d, _)| *d == 0.0) {
                    debug_assert_eq!(d, 0.0);
                    sum += responses[i];
                    count += 1;
                }
                return Ok(Smoothed {
                    value: sum / count as f64,
                    degenerate: true,
                });
            }
            radius
        }
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for &(d, i) in neighbours {
        if d >= h {
            break;
        }
        let w = kernel.weight(d / h);
        num += w * responses[i];
        den += w;
    }
    if den > 0.0 {
        Ok(Smoothed {
            value: num / den,
            degenerate: false,
        })
    } else {
        Ok(Smoothed {
            value: responses[neighbours[0].1],
            degenerate: true,
        })
    }
}

/// Distances from training curves (or their projections) to query points.
#[derive(Debug, Clone)]
pub(crate) enum DistanceSource {
    /// Scalar projections `<theta, X_i>`; distances are `|p_i - p_x|`.
    Projected {
        metric: PreparedMetric,
        projections: Vec<f64>,
    },
    /// Curves compared by a full semi-metric.
    Curves {
        metric: PreparedMetric,
        curves: Vec<Curve>,
    },
}

impl DistanceSource {
    pub(crate) fn new(kind: &SemiMetricKind, train: &TrainingSet) -> Result<Self> {
        let metric = kind.prepare(train.grid())?;
        if metric.is_projection() {
            let projections = train
                .curves()
                .iter()
                .map(|c| metric.project(c))
                .collect::<Result<Vec<_>>>()?;
            Ok(DistanceSource::Projected {
                metric,
                projections,
            })
        } else {
            Ok(DistanceSource::Curves {
                metric,
                curves: train.curves().to_vec(),
            })
        }
    }

    pub(crate) fn projections(&self) -> Option<&[f64]> {
        match self {
            DistanceSource::Projected { projections, .. } => Some(projections),
            DistanceSource::Curves { .. } => None,
        }
    }

    /// Distances from every training curve to `x`, in row order.
    pub(crate) fn distances_to(&self, x: &Curve) -> Result<Vec<f64>> {
        match self {
            DistanceSource::Projected {
                metric,
                projections,
            } => {
                let px = metric.project(x)?;
                Ok(projections.iter().map(|p| (p - px).abs()).collect())
            }
            DistanceSource::Curves { metric, curves } => {
                curves.iter().map(|c| metric.distance(c, x)).collect()
            }
        }
    }

    pub(crate) fn neighbourhood(&self, x: &Curve) -> Result<Neighbourhood> {
        let d = self.distances_to(x)?;
        Ok(sort_neighbourhood(
            d.into_iter().enumerate().map(|(i, d)| (d, i)).collect(),
        ))
    }

    /// Neighbourhood of training row `j` among the other rows.
    pub(crate) fn loo_neighbourhood(&self, j: usize) -> Result<Neighbourhood> {
        match self {
            DistanceSource::Projected { projections, .. } => {
                let pj = projections[j];
                Ok(sort_neighbourhood(
                    projections
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != j)
                        .map(|(i, p)| ((p - pj).abs(), i))
                        .collect(),
                ))
            }
            DistanceSource::Curves { metric, curves } => {
                let xj = &curves[j];
                let mut items = Vec::with_capacity(curves.len() - 1);
                for (i, c) in curves.iter().enumerate() {
                    if i != j {
                        items.push((metric.distance(c, xj)?, i));
                    }
                }
                Ok(sort_neighbourhood(items))
            }
        }
    }
}

/// Leave-one-out neighbourhoods for every row of a projected sample, built
/// from one global sort of the projections.
pub(crate) fn projected_loo_neighbourhoods(projections: &[f64]) -> Vec<Neighbourhood> {
    let n = projections.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| projections[a].total_cmp(&projections[b]).then(a.cmp(&b)));
    let mut out = Vec::with_capacity(n);
    let mut position = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        position[i] = pos;
    }
    for j in 0..n {
        let pj = projections[j];
        let pos = position[j];
        let mut merged: Neighbourhood = Vec::with_capacity(n.saturating_sub(1));
        let mut left = pos;
        let mut right = pos + 1;
        loop {
            let l = (left > 0).then(|| {
                let i = order[left - 1];
                (pj - projections[i], i)
            });
            let r = (right < n).then(|| {
                let i = order[right];
                (projections[i] - pj, i)
            });
            match (l, r) {
                (Some(a), Some(b)) => {
                    if by_distance_then_index(&a, &b) != Ordering::Greater {
                        merged.push(a);
                        left -= 1;
                    } else {
                        merged.push(b);
                        right += 1;
                    }
                }
                (Some(a), None) => {
                    merged.push(a);
                    left -= 1;
                }
                (None, Some(b)) => {
                    merged.push(b);
                    right += 1;
                }
                (None, None) => break,
            }
        }
        // the two walks are each sorted by distance; equal distances need index order
        let mut start = 0;
        while start < merged.len() {
            let mut end = start + 1;
            while end < merged.len() && merged[end].0 == merged[start].0 {
                end += 1;
            }
            if end - start > 1 {
                merged[start..end].sort_unstable_by_key(|&(_, i)| i);
            }
            start = end;
        }
        out.push(merged);
    }
    out
}

/// Smallest radius whose closed ball around `x` holds at least `k` training
/// curves: the `k`-th order statistic of the distances.
pub fn knn_bandwidth(
    train: &TrainingSet,
    semimetric: &SemiMetricKind,
    x: &Curve,
    k: usize,
) -> Result<f64> {
    if k == 0 || k > train.len() {
        return Err(FsimError::Parameter(format!(
            "k = {k} must lie in 1..={}",
            train.len()
        )));
    }
    let source = DistanceSource::new(semimetric, train)?;
    let neighbours = source.neighbourhood(x)?;
    Ok(neighbours[k - 1].0)
}

fn check_tuning(tuning: Tuning, pool: usize) -> Result<()> {
    match tuning {
        Tuning::Neighbours(k) if k == 0 || k >= pool => Err(FsimError::Parameter(format!(
            "k = {k} must lie in 1..={} for a pool of {pool} curves",
            pool.saturating_sub(1)
        ))),
        Tuning::Bandwidth(h) if !(h > 0.0 && h.is_finite()) => Err(FsimError::Parameter(format!(
            "bandwidth must be positive and finite, got {h}"
        ))),
        _ => Ok(()),
    }
}

/// Smoothed response at `x`.
pub fn smooth(train: &TrainingSet, config: &SmootherConfig, x: &Curve) -> Result<Smoothed> {
    check_tuning(config.tuning, train.len())?;
    let source = DistanceSource::new(&config.semimetric, train)?;
    let neighbours = source.neighbourhood(x)?;
    smooth_sorted(&neighbours, train.responses(), config.kernel, config.tuning)
}

/// Smoothed response at `X_j` computed without observation `j`.
pub fn smooth_loo(train: &TrainingSet, config: &SmootherConfig, j: usize) -> Result<Smoothed> {
    if train.len() < 3 {
        return Err(FsimError::Parameter(
            "leave-one-out smoothing needs at least three observations".into(),
        ));
    }
    if j >= train.len() {
        return Err(FsimError::Parameter(format!(
            "row {j} out of range for {} rows",
            train.len()
        )));
    }
    check_tuning(config.tuning, train.len() - 1)?;
    let source = DistanceSource::new(&config.semimetric, train)?;
    let neighbours = source.loo_neighbourhood(j)?;
    smooth_sorted(&neighbours, train.responses(), config.kernel, config.tuning)
}

/// Predictions of a fitted single-index model at new curves.
pub fn fsim_predict(fit: &FittedFsim, x_new: &[Curve]) -> Result<Vec<f64>> {
    Ok(fit.predict(x_new)?.into_iter().map(|s| s.value).collect())
}
