//! Leave-one-out cross-validation over tuning grids and candidate directions,
//! model fitting, and the residual boosting step.

use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::{build_direction_set, Direction, DirectionSetSpec};
use crate::curves::{Curve, SemiMetricKind};
use crate::error::{FsimError, Result};
use crate::estimators::{
    projected_loo_neighbourhoods, smooth_sorted, DistanceSource, KernelKind, Neighbourhood,
    Smoothed, TrainingSet, Tuning,
};

/// Strictly increasing positive bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct HGrid {
    values: Vec<f64>,
}

impl HGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FsimError::Parameter("bandwidth grid is empty".into()));
        }
        if values.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(FsimError::Parameter(
                "bandwidths must be positive and finite".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FsimError::Parameter(
                "bandwidth grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Strictly increasing neighbour counts usable with leave-one-out on `n` rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KGrid {
    values: Vec<usize>,
}

impl KGrid {
    pub fn new(values: Vec<usize>, n: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(FsimError::Parameter("neighbour grid is empty".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FsimError::Parameter(
                "neighbour grid must be strictly increasing".into(),
            ));
        }
        if values[0] < 1 || values[values.len() - 1] + 2 > n {
            return Err(FsimError::Parameter(format!(
                "neighbour counts must lie in 1..={} for {n} observations",
                n.saturating_sub(2)
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Tuning values scanned by cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub enum TuningGrid {
    /// One bandwidth grid shared by every direction.
    Bandwidths(HGrid),
    /// A bandwidth grid of the given size derived per direction from its
    /// projected distances (see [`default_h_grid`]).
    BandwidthsPerDirection {
        size: usize,
    },
    Neighbours(KGrid),
}

impl TuningGrid {
    fn is_neighbours(&self) -> bool {
        matches!(self, TuningGrid::Neighbours(_))
    }
}

/// Type-7 empirical quantile of an unsorted sample (linear interpolation
/// between order statistics).
pub(crate) fn quantile(values: &mut [f64], prob: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let pos = (values.len() - 1) as f64 * prob;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let (_, &mut a, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 || upper.is_empty() {
        return a;
    }
    let b = upper.iter().copied().fold(f64::INFINITY, f64::min);
    a + frac * (b - a)
}

/// Bandwidth grid from leave-one-out neighbourhoods: geometric from the
/// smallest radius giving every curve two neighbours to the 95% quantile of
/// the pairwise distances.
fn bandwidth_grid(neighbourhoods: &[Neighbourhood], size: usize) -> Result<Vec<f64>> {
    if size < 2 {
        return Err(FsimError::Parameter(format!(
            "a bandwidth grid needs at least two values, got {size}"
        )));
    }
    if neighbourhoods.len() < 3 {
        return Err(FsimError::Parameter(
            "a bandwidth grid needs at least three observations".into(),
        ));
    }
    let mut pairs = Vec::with_capacity(neighbourhoods.len() * (neighbourhoods.len() - 1) / 2);
    let mut second = 0.0f64;
    for (j, nb) in neighbourhoods.iter().enumerate() {
        second = second.max(nb[1].0);
        pairs.extend(nb.iter().filter(|&&(_, i)| i > j).map(|&(d, _)| d));
    }
    let max = pairs.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(FsimError::DegenerateDirection(
            "all pairwise distances are zero".into(),
        ));
    }
    let min_positive = pairs
        .iter()
        .copied()
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let mut hi = quantile(&mut pairs, 0.95);
    let mut lo = second;
    if !(lo > 0.0 && lo < hi) {
        lo = min_positive;
    }
    if lo >= hi {
        hi = max;
    }
    if lo >= hi {
        return Err(FsimError::DegenerateDirection(format!(
            "no usable bandwidth range (all positive distances equal {lo})"
        )));
    }
    let ratio = hi / lo;
    let last = (size - 1) as f64;
    Ok((0..size)
        .map(|i| match i {
            0 => lo,
            i if i == size - 1 => hi,
            i => lo * ratio.powf(i as f64 / last),
        })
        .collect())
}

fn loo_neighbourhoods(source: &DistanceSource, n: usize) -> Result<Vec<Neighbourhood>> {
    match source.projections() {
        Some(p) => Ok(projected_loo_neighbourhoods(p)),
        None => (0..n).map(|j| source.loo_neighbourhood(j)).collect(),
    }
}

/// Default bandwidth grid for a direction: `size` geometrically spaced values
/// between the smallest radius at which every training curve has two
/// neighbours and the 0.95 quantile of the pairwise projected distances.
pub fn default_h_grid(train: &TrainingSet, theta: &Direction, size: usize) -> Result<HGrid> {
    if train.len() < 3 {
        return Err(FsimError::Parameter(
            "a bandwidth grid needs at least three observations".into(),
        ));
    }
    let source = DistanceSource::new(&SemiMetricKind::Projection(theta.clone()), train)?;
    let neighbourhoods = loo_neighbourhoods(&source, train.len())?;
    HGrid::new(bandwidth_grid(&neighbourhoods, size)?)
}

/// Neighbour counts `{2, ..., floor(max_frac * (n - 1))}`, capped at `n - 2`
/// and thinned to at most `max_len` evenly spaced values.
pub fn k_grid(n: usize, max_frac: f64, max_len: usize) -> Result<KGrid> {
    if n < 4 {
        return Err(FsimError::Parameter(format!(
            "a neighbour grid needs at least four observations, got {n}"
        )));
    }
    if !(max_frac > 0.0 && max_frac <= 1.0) {
        return Err(FsimError::Parameter(format!(
            "maximum neighbour fraction must lie in (0, 1], got {max_frac}"
        )));
    }
    if max_len == 0 {
        return Err(FsimError::Parameter(
            "neighbour grid length must be positive".into(),
        ));
    }
    let top = ((max_frac * (n - 1) as f64).floor() as usize).min(n - 2);
    if top < 2 {
        return Err(FsimError::Parameter(format!(
            "no neighbour count >= 2 fits under fraction {max_frac} with {n} observations"
        )));
    }
    let count = top - 1;
    let values = if count <= max_len {
        (2..=top).collect()
    } else if max_len == 1 {
        vec![2]
    } else {
        let mut v: Vec<usize> = (0..max_len)
            .map(|i| {
                let x = 2.0 + (top - 2) as f64 * i as f64 / (max_len - 1) as f64;
                x.round() as usize
            })
            .collect();
        v.dedup();
        v
    };
    KGrid::new(values, n)
}

/// `{2, ..., floor(0.95 (n - 1))}`, thinned to at most 50 values.
pub fn default_k_grid(n: usize) -> Result<KGrid> {
    k_grid(n, 0.95, 50)
}

/// Cross-validation criterion over (tuning position x direction).
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    /// `tuning_values[t][m]`: the tuning value used in cell (t, m).
    pub tuning_values: Vec<Vec<f64>>,
    /// `criterion[t][m]`: mean squared leave-one-out error, `+inf` when degenerate.
    pub criterion: Vec<Vec<f64>>,
    pub degenerate: Vec<Vec<bool>>,
    pub neighbours: bool,
    pub best_position: usize,
    pub best_direction: usize,
    pub best_score: f64,
    pub degenerate_count: usize,
}

impl CvResult {
    pub fn best_tuning(&self) -> Tuning {
        let v = self.tuning_values[self.best_position][self.best_direction];
        if self.neighbours {
            Tuning::Neighbours(v as usize)
        } else {
            Tuning::Bandwidth(v)
        }
    }

    pub fn positions(&self) -> usize {
        self.criterion.len()
    }

    pub fn directions(&self) -> usize {
        self.criterion.first().map_or(0, Vec::len)
    }

    /// For every tuning position, the best direction and its criterion.
    pub fn profile(&self) -> Vec<(usize, f64)> {
        self.criterion
            .iter()
            .map(|row| {
                let mut best = (0, row[0]);
                for (m, &c) in row.iter().enumerate().skip(1) {
                    if c < best.1 {
                        best = (m, c);
                    }
                }
                best
            })
            .collect()
    }

    fn from_columns(columns: Vec<Column>, neighbours: bool) -> Self {
        let positions = columns[0].criterion.len();
        let directions = columns.len();
        let mut tuning_values = vec![vec![0.0; directions]; positions];
        let mut criterion = vec![vec![0.0; directions]; positions];
        let mut degenerate = vec![vec![false; directions]; positions];
        let mut degenerate_count = 0;
        for (m, col) in columns.into_iter().enumerate() {
            for t in 0..positions {
                tuning_values[t][m] = col.tunings[t];
                criterion[t][m] = col.criterion[t];
                degenerate[t][m] = col.degenerate[t];
                degenerate_count += col.degenerate[t] as usize;
            }
        }
        let mut result = Self {
            tuning_values,
            criterion,
            degenerate,
            neighbours,
            best_position: 0,
            best_direction: 0,
            best_score: f64::INFINITY,
            degenerate_count,
        };
        // inner argmin over directions for each tuning value, outer over tuning
        for (t, (m, c)) in result.profile().into_iter().enumerate() {
            if c < result.best_score {
                result.best_score = c;
                result.best_position = t;
                result.best_direction = m;
            }
        }
        result
    }
}

struct Column {
    tunings: Vec<f64>,
    criterion: Vec<f64>,
    degenerate: Vec<bool>,
}

fn evaluate_column(
    neighbourhoods: &[Neighbourhood],
    responses: &[f64],
    grid: &TuningGrid,
    kernel: KernelKind,
) -> Result<Column> {
    let tunings: Vec<Tuning> = match grid {
        TuningGrid::Bandwidths(g) => g.values().iter().map(|&h| Tuning::Bandwidth(h)).collect(),
        TuningGrid::Neighbours(g) => g.values().iter().map(|&k| Tuning::Neighbours(k)).collect(),
        TuningGrid::BandwidthsPerDirection { size } => {
            match bandwidth_grid(neighbourhoods, *size) {
                Ok(v) => v.into_iter().map(Tuning::Bandwidth).collect(),
                Err(FsimError::DegenerateDirection(_)) => {
                    return Ok(Column {
                        tunings: vec![f64::NAN; *size],
                        criterion: vec![f64::INFINITY; *size],
                        degenerate: vec![true; *size],
                    });
                }
                Err(e) => return Err(e),
            }
        }
    };
    let n = responses.len() as f64;
    let mut criterion = Vec::with_capacity(tunings.len());
    let mut degenerate = Vec::with_capacity(tunings.len());
    for &tuning in &tunings {
        let mut sum = 0.0;
        let mut flagged = false;
        for (j, nb) in neighbourhoods.iter().enumerate() {
            let s = smooth_sorted(nb, responses, kernel, tuning)?;
            flagged |= s.degenerate;
            let e = responses[j] - s.value;
            sum += e * e;
        }
        criterion.push(if flagged { f64::INFINITY } else { sum / n });
        degenerate.push(flagged);
    }
    Ok(Column {
        tunings: tunings.into_iter().map(Tuning::value).collect(),
        criterion,
        degenerate,
    })
}

fn check_grid(train: &TrainingSet, grid: &TuningGrid) -> Result<()> {
    if train.len() < 3 {
        return Err(FsimError::Parameter(
            "cross-validation needs at least three observations".into(),
        ));
    }
    match grid {
        TuningGrid::Neighbours(g) => {
            KGrid::new(g.values().to_vec(), train.len())?;
        }
        TuningGrid::BandwidthsPerDirection { size } if *size < 2 => {
            return Err(FsimError::Parameter(format!(
                "a bandwidth grid needs at least two values, got {size}"
            )));
        }
        _ => {}
    }
    Ok(())
}

/// Leave-one-out cross-validation of the single-index smoother over every
/// (tuning value, direction) pair.
///
/// Degenerate cells (a fallback was needed for some left-out point, or the
/// direction collapses all projections) score `+inf`. The selected cell takes,
/// for each tuning position, the best direction, and then the best tuning
/// position; ties go to the smallest tuning index, then direction index.
pub fn cross_validate(
    train: &TrainingSet,
    directions: &[Direction],
    grid: &TuningGrid,
    kernel: KernelKind,
) -> Result<CvResult> {
    if directions.is_empty() {
        return Err(FsimError::EmptyDirectionSet(
            "no directions to cross-validate".into(),
        ));
    }
    check_grid(train, grid)?;
    let columns = directions
        .par_iter()
        .map(|theta| {
            let source = DistanceSource::new(&SemiMetricKind::Projection(theta.clone()), train)?;
            let neighbourhoods = loo_neighbourhoods(&source, train.len())?;
            evaluate_column(&neighbourhoods, train.responses(), grid, kernel)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvResult::from_columns(columns, grid.is_neighbours()))
}

/// Cross-validation of a smoother over a whole-curve semi-metric (a single
/// column).
pub fn cross_validate_metric(
    train: &TrainingSet,
    semimetric: &SemiMetricKind,
    grid: &TuningGrid,
    kernel: KernelKind,
) -> Result<CvResult> {
    check_grid(train, grid)?;
    let source = DistanceSource::new(semimetric, train)?;
    let neighbourhoods: Vec<Neighbourhood> = (0..train.len())
        .into_par_iter()
        .map(|j| source.loo_neighbourhood(j))
        .collect::<Result<_>>()?;
    let column = evaluate_column(&neighbourhoods, train.responses(), grid, kernel)?;
    Ok(CvResult::from_columns(vec![column], grid.is_neighbours()))
}

/// Which smoother family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SmootherKind {
    Kernel,
    Knn,
}

impl SmootherKind {
    pub fn name(self) -> &'static str {
        match self {
            SmootherKind::Kernel => "kernel",
            SmootherKind::Knn => "knn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kernel" => Ok(SmootherKind::Kernel),
            "knn" => Ok(SmootherKind::Knn),
            other => Err(FsimError::Parameter(format!("unknown smoother '{other}'"))),
        }
    }
}

/// Everything needed to build direction sets and tuning grids for a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub smoother: SmootherKind,
    pub kernel: KernelKind,
    pub basis_order: usize,
    /// Candidate interior knot counts; the one with the lowest CV score wins.
    pub interior_knots: Vec<usize>,
    pub seeds: Vec<f64>,
    /// Positivity point; the middle of the grid when `None`.
    pub t0: Option<f64>,
    pub h_grid_size: usize,
    pub k_max_frac: f64,
    pub k_grid_max_len: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            smoother: SmootherKind::Knn,
            kernel: KernelKind::Epanechnikov,
            basis_order: 3,
            interior_knots: vec![3],
            seeds: vec![-1.0, 0.0, 1.0],
            t0: None,
            h_grid_size: 20,
            k_max_frac: 0.95,
            k_grid_max_len: 50,
        }
    }
}

impl FitOptions {
    pub fn tuning_grid(&self, n: usize) -> Result<TuningGrid> {
        Ok(match self.smoother {
            SmootherKind::Kernel => TuningGrid::BandwidthsPerDirection {
                size: self.h_grid_size,
            },
            SmootherKind::Knn => {
                TuningGrid::Neighbours(k_grid(n, self.k_max_frac, self.k_grid_max_len)?)
            }
        })
    }

    pub fn direction_spec(
        &self,
        train: &TrainingSet,
        interior_knots: usize,
    ) -> Result<DirectionSetSpec> {
        let grid = train.grid().clone();
        let mut spec = DirectionSetSpec::standard(self.basis_order, interior_knots, grid)?;
        spec.seeds = self.seeds.clone();
        if let Some(t0) = self.t0 {
            spec.t0 = t0;
        }
        Ok(spec)
    }
}

/// A fitted single-index model: direction, tuning, kernel and training data.
#[derive(Debug, Clone)]
pub struct FittedFsim {
    direction: Direction,
    tuning: Tuning,
    kernel: KernelKind,
    train: Arc<TrainingSet>,
    cv: CvResult,
    /// `(interior knots, best CV score)` for every candidate basis size.
    model_selection: Vec<(usize, f64)>,
    source: DistanceSource,
}

impl FittedFsim {
    pub fn new(
        train: Arc<TrainingSet>,
        direction: Direction,
        tuning: Tuning,
        kernel: KernelKind,
        cv: CvResult,
    ) -> Result<Self> {
        let source = DistanceSource::new(&SemiMetricKind::Projection(direction.clone()), &train)?;
        if let Tuning::Neighbours(k) = tuning {
            if k == 0 || k >= train.len() {
                return Err(FsimError::Parameter(format!(
                    "k = {k} does not fit {} training curves",
                    train.len()
                )));
            }
        }
        Ok(Self {
            direction,
            tuning,
            kernel,
            train,
            cv,
            model_selection: Vec::new(),
            source,
        })
    }

    pub fn direction(&self) -> &Direction {
        &self.direction
    }

    pub fn tuning(&self) -> Tuning {
        self.tuning
    }

    pub fn kernel(&self) -> KernelKind {
        self.kernel
    }

    pub fn train(&self) -> &Arc<TrainingSet> {
        &self.train
    }

    pub fn cv(&self) -> &CvResult {
        &self.cv
    }

    pub fn model_selection(&self) -> &[(usize, f64)] {
        &self.model_selection
    }

    /// Training projections `<theta, X_i>`.
    pub fn projections(&self) -> &[f64] {
        self.source.projections().expect("projection metric")
    }

    /// `<theta, x>` for a new curve.
    pub fn project(&self, x: &Curve) -> Result<f64> {
        match &self.source {
            DistanceSource::Projected { metric, .. } => metric.project(x),
            DistanceSource::Curves { .. } => unreachable!("single-index models project"),
        }
    }

    pub fn predict(&self, x_new: &[Curve]) -> Result<Vec<Smoothed>> {
        x_new
            .par_iter()
            .map(|x| {
                let nb = self.source.neighbourhood(x)?;
                smooth_sorted(&nb, self.train.responses(), self.kernel, self.tuning)
            })
            .collect()
    }

    /// Predictions at the training curves themselves.
    pub fn fitted_values(&self) -> Result<Vec<Smoothed>> {
        self.predict(self.train.curves())
    }
}

/// Cross-validates over the given directions and returns the selected model.
pub fn fit_fsim_over(
    train: Arc<TrainingSet>,
    directions: &[Direction],
    grid: &TuningGrid,
    kernel: KernelKind,
) -> Result<FittedFsim> {
    let cv = cross_validate(&train, directions, grid, kernel)?;
    if !cv.best_score.is_finite() {
        return Err(FsimError::Degenerate(
            "every cross-validation cell is degenerate".into(),
        ));
    }
    let direction = directions[cv.best_direction].clone();
    let tuning = cv.best_tuning();
    FittedFsim::new(train, direction, tuning, kernel, cv)
}

/// Candidate direction sets, one per interior knot count in `options`.
pub fn build_direction_sets(
    train: &TrainingSet,
    options: &FitOptions,
) -> Result<Vec<(usize, Vec<Direction>)>> {
    if options.interior_knots.is_empty() {
        return Err(FsimError::Parameter("no interior knot counts given".into()));
    }
    options
        .interior_knots
        .iter()
        .map(|&m| Ok((m, build_direction_set(&options.direction_spec(train, m)?)?)))
        .collect()
}

/// Cross-validates every direction set and keeps the global minimiser (ties go
/// to the earlier set).
pub fn fit_fsim_sets(
    train: Arc<TrainingSet>,
    sets: &[(usize, Vec<Direction>)],
    grid: &TuningGrid,
    kernel: KernelKind,
) -> Result<FittedFsim> {
    if sets.is_empty() {
        return Err(FsimError::EmptyDirectionSet(
            "no direction sets given".into(),
        ));
    }
    let mut best: Option<FittedFsim> = None;
    let mut selection = Vec::with_capacity(sets.len());
    for (m, directions) in sets {
        let cv = cross_validate(&train, directions, grid, kernel)?;
        selection.push((*m, cv.best_score));
        let better = match &best {
            None => cv.best_score.is_finite(),
            Some(b) => cv.best_score < b.cv.best_score,
        };
        if better {
            let direction = directions[cv.best_direction].clone();
            let tuning = cv.best_tuning();
            best = Some(FittedFsim::new(
                train.clone(),
                direction,
                tuning,
                kernel,
                cv,
            )?);
        }
    }
    let mut fit = best
        .ok_or_else(|| FsimError::Degenerate("every cross-validation cell is degenerate".into()))?;
    fit.model_selection = selection;
    Ok(fit)
}

/// Builds the direction sets described by `options`, cross-validates them and
/// returns the selected model.
pub fn fit_fsim(train: Arc<TrainingSet>, options: &FitOptions) -> Result<FittedFsim> {
    let sets = build_direction_sets(&train, options)?;
    let grid = options.tuning_grid(train.len())?;
    fit_fsim_sets(train, &sets, &grid, options.kernel)
}

/// A fully nonparametric smoother over the L2 semi-metric.
#[derive(Debug, Clone)]
pub struct FittedFnm {
    tuning: Tuning,
    kernel: KernelKind,
    train: TrainingSet,
    cv: CvResult,
    source: DistanceSource,
}

impl FittedFnm {
    /// Cross-validates the tuning on `grid` and keeps the minimiser.
    pub fn fit(train: TrainingSet, grid: &TuningGrid, kernel: KernelKind) -> Result<Self> {
        let cv = cross_validate_metric(&train, &SemiMetricKind::L2, grid, kernel)?;
        if !cv.best_score.is_finite() {
            return Err(FsimError::Degenerate(
                "every cross-validation cell is degenerate".into(),
            ));
        }
        let tuning = cv.best_tuning();
        let source = DistanceSource::new(&SemiMetricKind::L2, &train)?;
        Ok(Self {
            tuning,
            kernel,
            train,
            cv,
            source,
        })
    }

    pub fn tuning(&self) -> Tuning {
        self.tuning
    }

    pub fn kernel(&self) -> KernelKind {
        self.kernel
    }

    pub fn cv(&self) -> &CvResult {
        &self.cv
    }

    pub fn train(&self) -> &TrainingSet {
        &self.train
    }

    pub fn predict(&self, x_new: &[Curve]) -> Result<Vec<Smoothed>> {
        x_new
            .par_iter()
            .map(|x| {
                let nb = self.source.neighbourhood(x)?;
                smooth_sorted(&nb, self.train.responses(), self.kernel, self.tuning)
            })
            .collect()
    }
}

/// Single-index fit plus a nonparametric fit of its residuals on a second
/// covariate.
#[derive(Debug, Clone)]
pub struct BoostedFsim {
    pub base: FittedFsim,
    pub residual: FittedFnm,
}

impl BoostedFsim {
    /// Sum of the base prediction at `base_curves` and the residual
    /// prediction at `boost_curves`, row by row.
    pub fn predict(&self, base_curves: &[Curve], boost_curves: &[Curve]) -> Result<Vec<f64>> {
        if base_curves.len() != boost_curves.len() {
            return Err(FsimError::Dimension(format!(
                "{} base curves but {} boosting curves",
                base_curves.len(),
                boost_curves.len()
            )));
        }
        let base = self.base.predict(base_curves)?;
        let extra = self.residual.predict(boost_curves)?;
        Ok(base
            .iter()
            .zip(&extra)
            .map(|(a, b)| a.value + b.value)
            .collect())
    }
}

/// Fits the residuals `Y_i - r(<theta, X_i>)` of `fit` on `boost_covariates`
/// (aligned with the training rows) with an L2 smoother tuned by
/// leave-one-out cross-validation.
pub fn boost_residuals(
    fit: &FittedFsim,
    boost_covariates: &[Curve],
    grid: &TuningGrid,
    kernel: KernelKind,
) -> Result<BoostedFsim> {
    let train = fit.train();
    if boost_covariates.len() != train.len() {
        return Err(FsimError::Dimension(format!(
            "{} boosting curves for {} training rows",
            boost_covariates.len(),
            train.len()
        )));
    }
    let fitted = fit.fitted_values()?;
    let residuals: Vec<f64> = train
        .responses()
        .iter()
        .zip(&fitted)
        .map(|(y, f)| y - f.value)
        .collect();
    let residual_set = TrainingSet::new(boost_covariates.to_vec(), residuals)?;
    let residual = FittedFnm::fit(residual_set, grid, kernel)?;
    Ok(BoostedFsim {
        base: fit.clone(),
        residual,
    })
}

/// Mean squared error of prediction.
pub fn msep(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(FsimError::Dimension(format!(
            "{} observations but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(FsimError::Parameter("MSEP of an empty sample".into()));
    }
    let mut sum = 0.0;
    for (a, b) in y_true.iter().zip(y_pred) {
        let e = a - b;
        sum += e * e;
    }
    Ok(sum / y_true.len() as f64)
}
