#![allow(dead_code)]

use std::sync::Arc;

use fsim::basis::{BasisSpec, Direction};
use fsim::curves::{Curve, Grid, SemiMetricKind};
use fsim::estimators::{smooth, KernelKind, SmootherConfig, TrainingSet, Tuning};
use fsim::selection::{default_h_grid, TuningGrid};
use fsim::FsimError;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_grid(rng: &mut ChaCha8Rng, p: usize) -> Arc<Grid> {
    let mut points: Vec<f64> = (0..p)
        .map(|i| i as f64 + 0.9 * rng.random::<f64>())
        .collect();
    let max = points[p - 1];
    points.iter_mut().for_each(|t| *t /= max);
    Arc::new(Grid::new(points).unwrap())
}

pub fn random_curve(rng: &mut ChaCha8Rng, grid: &Arc<Grid>) -> Curve {
    let a: f64 = rng.random_range(-2.0..2.0);
    let b: f64 = rng.random_range(-2.0..2.0);
    let c: f64 = rng.random_range(-1.0..1.0);
    let f: f64 = rng.random_range(1.0..4.0);
    Curve::from_fn(grid.clone(), move |t| a * (f * t).sin() + b * t + c * t * t).unwrap()
}

pub fn random_set(rng: &mut ChaCha8Rng, n: usize, p: usize) -> TrainingSet {
    let grid = random_grid(rng, p);
    let curves = (0..n).map(|_| random_curve(rng, &grid)).collect();
    let y = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    TrainingSet::new(curves, y).unwrap()
}

pub fn random_direction(rng: &mut ChaCha8Rng) -> Direction {
    let order = rng.random_range(1..=3);
    let knots = rng.random_range(0..=2);
    let spec = BasisSpec::new(order, knots, 0.0, 1.0).unwrap();
    let coefficients = (0..spec.dimension())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Direction::new(spec, coefficients).unwrap()
}

/// LOO criterion by rebuilding the reduced training set for every cell.
pub fn brute_force_cv(
    train: &TrainingSet,
    directions: &[Direction],
    grid: &TuningGrid,
    kernel: KernelKind,
) -> Vec<Vec<f64>> {
    let n = train.len();
    let mut columns = Vec::new();
    for theta in directions {
        let tunings: Vec<Tuning> = match grid {
            TuningGrid::Neighbours(k) => {
                k.values().iter().map(|&k| Tuning::Neighbours(k)).collect()
            }
            TuningGrid::Bandwidths(h) => h.values().iter().map(|&h| Tuning::Bandwidth(h)).collect(),
            TuningGrid::BandwidthsPerDirection { size } => {
                match default_h_grid(train, theta, *size) {
                    Ok(h) => h.values().iter().map(|&h| Tuning::Bandwidth(h)).collect(),
                    Err(FsimError::DegenerateDirection(_)) => {
                        columns.push(vec![f64::INFINITY; *size]);
                        continue;
                    }
                    Err(e) => panic!("{e}"),
                }
            }
        };
        let mut column = Vec::new();
        for tuning in tunings {
            let config = SmootherConfig {
                kernel,
                semimetric: SemiMetricKind::Projection(theta.clone()),
                tuning,
            };
            let mut sum = 0.0;
            let mut degenerate = false;
            for j in 0..n {
                let reduced = train.without(j).unwrap();
                let s = smooth(&reduced, &config, &train.curves()[j]).unwrap();
                degenerate |= s.degenerate;
                sum += (train.responses()[j] - s.value).powi(2);
            }
            column.push(if degenerate {
                f64::INFINITY
            } else {
                sum / n as f64
            });
        }
        columns.push(column);
    }
    let positions = columns[0].len();
    (0..positions)
        .map(|t| columns.iter().map(|c| c[t]).collect())
        .collect()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}
