//! Functional single-index regression with a data-driven direction.
//!
//! Curves live on a shared grid with trapezoid weights. A direction `theta` is
//! a B-spline function; the single-index smoother averages responses of
//! training curves whose projections `<theta, X_i>` are close to the
//! projection of the new curve. Direction and tuning are chosen jointly by
//! leave-one-out cross-validation over a finite candidate set.

pub mod basis;
pub mod curves;
pub mod error;
pub mod estimators;
pub mod io;
pub mod selection;
pub mod simulation;

pub use basis::{
    build_direction_set, eval_basis, eval_direction, BasisSpec, Direction, DirectionSetSpec,
};
pub use curves::{derivative_curve, inner_product, semi_metric, Curve, Grid, SemiMetricKind};
pub use error::{FsimError, Result};
pub use estimators::{
    knn_bandwidth, smooth, smooth_loo, KernelKind, Smoothed, SmootherConfig, TrainingSet, Tuning,
};
pub use selection::{
    boost_residuals, cross_validate, fit_fsim, msep, BoostedFsim, CvResult, FitOptions, FittedFnm,
    FittedFsim, SmootherKind, TuningGrid,
};
