//! Synthetic single-index design and seeded Monte-Carlo replications.
//!
//! Curves are `X(t) = a cos(2 pi t) + b sin(4 pi t) + 2 c (t - 0.25)(t - 0.5)`
//! on an equispaced grid over `[0, 1]`, with `a`, `b`, `c` drawn independently
//! from an even mixture of `U(5, 10)` and `U(20, 20.5)`. Responses are
//! `(<theta0, X>)^3` plus centred Gaussian noise whose variance is a fixed
//! fraction of the empirical variance of the signal.
//!
//! Every replicate owns a `ChaCha8Rng` seeded with `base_seed + replicate`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::basis::{eval_direction, BasisSpec, Direction};
use crate::curves::{inner_product, Curve, Grid};
use crate::error::{FsimError, Result};
use crate::estimators::{TrainingSet, Tuning};
use crate::selection::{
    build_direction_sets, fit_fsim_sets, msep, FitOptions, FittedFsim, SmootherKind,
};

/// Coefficient printed for the simulation direction on the order-3 basis with
/// three interior knots: `(c, c, c, c, 0, 0)`.
pub const THETA0_COEFFICIENT: f64 = 1.201061;

/// The simulation direction on `[0, 1]`.
pub fn default_theta0() -> Direction {
    let spec = BasisSpec::new(3, 3, 0.0, 1.0).expect("valid basis");
    let c = THETA0_COEFFICIENT;
    Direction::new(spec, vec![c, c, c, c, 0.0, 0.0]).expect("six coefficients")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDesign {
    pub n_train: usize,
    pub n_test: usize,
    pub grid_size: usize,
    /// Noise variance as a fraction of the signal's empirical variance.
    pub noise_ratio: f64,
    pub seed: u64,
    pub theta0: Direction,
    /// Rescale responses to zero mean and unit variance (training statistics)
    /// before fitting; MSEP is then reported on that scale.
    pub standardize: bool,
}

impl SimDesign {
    pub fn new(n_train: usize, seed: u64) -> Self {
        Self {
            n_train,
            n_test: 25,
            grid_size: 100,
            noise_ratio: 0.025,
            seed,
            theta0: default_theta0(),
            standardize: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_train < 10 {
            return Err(FsimError::Parameter(format!(
                "the training sample needs at least 10 curves, got {}",
                self.n_train
            )));
        }
        if self.n_test == 0 {
            return Err(FsimError::Parameter("the test sample is empty".into()));
        }
        if !(self.noise_ratio >= 0.0 && self.noise_ratio.is_finite()) {
            return Err(FsimError::Parameter(format!(
                "noise ratio must be non-negative, got {}",
                self.noise_ratio
            )));
        }
        let (min, max) = self.theta0.spec().domain();
        if min > 0.0 || max < 1.0 {
            return Err(FsimError::Parameter(
                "the simulation direction must be defined on [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// One simulated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReplicate {
    pub train: TrainingSet,
    pub test: TrainingSet,
    /// `<theta0, X_i>` for all training rows followed by all test rows.
    pub true_projections: Vec<f64>,
}

impl SimReplicate {
    /// Responses shifted and scaled by the training mean and standard deviation.
    pub fn standardized(&self) -> Result<Self> {
        let y = self.train.responses();
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if !(var > 0.0) {
            return Err(FsimError::Degenerate(
                "training responses have zero variance".into(),
            ));
        }
        let sd = var.sqrt();
        let scale = |ys: &[f64]| ys.iter().map(|v| (v - mean) / sd).collect::<Vec<_>>();
        Ok(Self {
            train: self.train.with_responses(scale(y))?,
            test: self.test.with_responses(scale(self.test.responses()))?,
            true_projections: self.true_projections.clone(),
        })
    }
}

/// Draw from the even mixture of `U(5, 10)` and `U(20, 20.5)`.
pub fn draw_coefficient<R: Rng>(rng: &mut R) -> f64 {
    let (lo, hi) = if rng.random_bool(0.5) {
        (5.0, 10.0)
    } else {
        (20.0, 20.5)
    };
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn simulated_curve(grid: &Arc<Grid>, a: f64, b: f64, c: f64) -> Result<Curve> {
    Curve::from_fn(grid.clone(), |t| {
        a * (2.0 * PI * t).cos() + b * (4.0 * PI * t).sin() + 2.0 * c * (t - 0.25) * (t - 0.5)
    })
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

pub fn generate_replicate(design: &SimDesign) -> Result<SimReplicate> {
    design.validate()?;
    let grid = Arc::new(Grid::uniform(0.0, 1.0, design.grid_size)?);
    let theta = eval_direction(&design.theta0, &grid)?;
    let total = design.n_train + design.n_test;
    let mut rng = ChaCha8Rng::seed_from_u64(design.seed);

    let mut curves = Vec::with_capacity(total);
    let mut projections = Vec::with_capacity(total);
    for _ in 0..total {
        let a = draw_coefficient(&mut rng);
        let b = draw_coefficient(&mut rng);
        let c = draw_coefficient(&mut rng);
        let x = simulated_curve(&grid, a, b, c)?;
        projections.push(inner_product(&theta, &x)?);
        curves.push(x);
    }
    let signal: Vec<f64> = projections.iter().map(|u| u * u * u).collect();
    let noise_sd = (design.noise_ratio * sample_variance(&signal)).sqrt();
    let responses: Vec<f64> = if noise_sd > 0.0 {
        let normal = Normal::new(0.0, noise_sd)
            .map_err(|e| FsimError::Parameter(format!("noise distribution: {e}")))?;
        signal.iter().map(|s| s + normal.sample(&mut rng)).collect()
    } else {
        signal
    };

    let test_curves = curves.split_off(design.n_train);
    let train_y = responses[..design.n_train].to_vec();
    let test_y = responses[design.n_train..].to_vec();
    Ok(SimReplicate {
        train: TrainingSet::new(curves, train_y)?,
        test: TrainingSet::new(test_curves, test_y)?,
        true_projections: projections,
    })
}

/// Outcome of one smoother on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub n: usize,
    pub smoother: SmootherKind,
    pub outcome: std::result::Result<ReplicateFit, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateFit {
    pub msep: f64,
    pub tuning: f64,
    /// Index of the selected tuning value in its grid.
    pub position: usize,
    pub direction_index: usize,
    pub interior_knots: usize,
    /// Per tuning position: (tuning value, CV(t, best theta at t), test MSEP
    /// with that pair). Covers the selected knot count.
    pub curve: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub smoother: SmootherKind,
    pub mean_msep: f64,
    pub sd_msep: f64,
    pub replicates: usize,
    pub failed: usize,
}

/// Replicate-averaged CV and test-MSEP curves by tuning position.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub n: usize,
    pub smoother: SmootherKind,
    pub position: usize,
    pub mean_tuning: f64,
    pub mean_cv: f64,
    pub mean_msep: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub records: Vec<ReplicateRecord>,
    pub summary: Vec<SummaryRow>,
    pub curves: Vec<CurveRow>,
}

/// Sum by recursive halving, so the rounding pattern depends only on the
/// length of the input.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    (mean, (pairwise_sum(&sq) / (n - 1.0)).sqrt())
}

fn fit_replicate(
    rep: &SimReplicate,
    smoother: SmootherKind,
    options: &FitOptions,
) -> Result<ReplicateFit> {
    let train = Arc::new(rep.train.clone());
    let mut options = options.clone();
    options.smoother = smoother;
    let sets = build_direction_sets(&train, &options)?;
    let grid = options.tuning_grid(train.len())?;
    let fit = fit_fsim_sets(train.clone(), &sets, &grid, options.kernel)?;
    let pred: Vec<f64> = fit
        .predict(rep.test.curves())?
        .into_iter()
        .map(|s| s.value)
        .collect();
    let error = msep(rep.test.responses(), &pred)?;

    let knots = fit.direction().spec().interior_knots();
    let directions = &sets
        .iter()
        .find(|(m, _)| *m == knots)
        .expect("selected knot count comes from the sets")
        .1;
    let cv = fit.cv();
    let mut curve = Vec::with_capacity(cv.positions());
    for (t, (m, score)) in cv.profile().into_iter().enumerate() {
        let value = cv.tuning_values[t][m];
        let test_error = if score.is_finite() {
            let tuning = if cv.neighbours {
                Tuning::Neighbours(value as usize)
            } else {
                Tuning::Bandwidth(value)
            };
            let at = FittedFsim::new(
                train.clone(),
                directions[m].clone(),
                tuning,
                options.kernel,
                cv.clone(),
            )?;
            let p: Vec<f64> = at
                .predict(rep.test.curves())?
                .into_iter()
                .map(|s| s.value)
                .collect();
            msep(rep.test.responses(), &p)?
        } else {
            f64::NAN
        };
        curve.push((value, score, test_error));
    }

    Ok(ReplicateFit {
        msep: error,
        tuning: fit.tuning().value(),
        position: cv.best_position,
        direction_index: cv.best_direction,
        interior_knots: knots,
        curve,
    })
}

/// Runs `replicates` seeded replications of `design` (replicate `m` uses seed
/// `design.seed + m`) and fits every smoother on each.
pub fn run_monte_carlo(
    design: &SimDesign,
    replicates: usize,
    smoothers: &[SmootherKind],
    options: &FitOptions,
) -> Result<MonteCarloReport> {
    if replicates == 0 {
        return Err(FsimError::Parameter(
            "at least one replicate is required".into(),
        ));
    }
    if smoothers.is_empty() {
        return Err(FsimError::Parameter("no smoother requested".into()));
    }
    design.validate()?;

    let per_replicate: Vec<Vec<ReplicateRecord>> = (0..replicates)
        .into_par_iter()
        .map(|m| {
            let seed = design.seed.wrapping_add(m as u64);
            let rep_design = SimDesign {
                seed,
                ..design.clone()
            };
            let replicate = generate_replicate(&rep_design).and_then(|r| {
                if design.standardize {
                    r.standardized()
                } else {
                    Ok(r)
                }
            });
            smoothers
                .iter()
                .map(|&smoother| ReplicateRecord {
                    replicate: m,
                    seed,
                    n: design.n_train,
                    smoother,
                    outcome: replicate.as_ref().map_err(|e| e.to_string()).and_then(|r| {
                        fit_replicate(r, smoother, options).map_err(|e| e.to_string())
                    }),
                })
                .collect()
        })
        .collect();
    let records: Vec<ReplicateRecord> = per_replicate.into_iter().flatten().collect();

    let mut summary = Vec::new();
    let mut curves = Vec::new();
    for &smoother in smoothers {
        let fits: Vec<&ReplicateFit> = records
            .iter()
            .filter(|r| r.smoother == smoother)
            .filter_map(|r| r.outcome.as_ref().ok())
            .collect();
        let failed = replicates - fits.len();
        let errors: Vec<f64> = fits.iter().map(|f| f.msep).collect();
        let (mean_msep, sd_msep) = mean_sd(&errors);
        summary.push(SummaryRow {
            n: design.n_train,
            smoother,
            mean_msep,
            sd_msep,
            replicates: fits.len(),
            failed,
        });
        let positions = fits.iter().map(|f| f.curve.len()).min().unwrap_or(0);
        for t in 0..positions {
            let col = |pick: fn(&(f64, f64, f64)) -> f64| -> f64 {
                let v: Vec<f64> = fits.iter().map(|f| pick(&f.curve[t])).collect();
                pairwise_sum(&v) / v.len() as f64
            };
            curves.push(CurveRow {
                n: design.n_train,
                smoother,
                position: t,
                mean_tuning: col(|c| c.0),
                mean_cv: col(|c| c.1),
                mean_msep: col(|c| c.2),
            });
        }
    }

    Ok(MonteCarloReport {
        records,
        summary,
        curves,
    })
}
