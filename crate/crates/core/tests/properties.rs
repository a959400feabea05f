mod common;

use common::*;
use fsim::curves::{semi_metric, SemiMetricKind};
use fsim::estimators::{knn_bandwidth, smooth, smooth_loo, KernelKind, SmootherConfig, Tuning};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Case {
    train: fsim::TrainingSet,
    x: fsim::Curve,
    config: SmootherConfig,
}

fn case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=15);
    let p = rng.random_range(4..=20);
    let train = random_set(&mut rng, n, p);
    let x = random_curve(&mut rng, train.grid());
    let kernel = if rng.random_bool(0.5) {
        KernelKind::Epanechnikov
    } else {
        KernelKind::Indicator
    };
    let tuning = if rng.random_bool(0.5) {
        Tuning::Neighbours(rng.random_range(1..n))
    } else {
        Tuning::Bandwidth(rng.random_range(0.01..2.0))
    };
    Case {
        train,
        x,
        config: SmootherConfig {
            kernel,
            semimetric: SemiMetricKind::Projection(random_direction(&mut rng)),
            tuning,
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn constant_responses_are_reproduced(seed in any::<u64>(), c in -1e3f64..1e3) {
        let Case { train, x, config } = case(seed);
        let flat = train.with_responses(vec![c; train.len()]).unwrap();
        let v = smooth(&flat, &config, &x).unwrap().value;
        prop_assert!((v - c).abs() <= 1e-12 * c.abs().max(1.0));
    }

    #[test]
    fn shift_and_scale_equivariance(seed in any::<u64>(), shift in -50.0f64..50.0, scale in 0.01f64..100.0) {
        let Case { train, x, config } = case(seed);
        let base = smooth(&train, &config, &x).unwrap();
        let shifted: Vec<f64> = train.responses().iter().map(|y| y + shift).collect();
        let scaled: Vec<f64> = train.responses().iter().map(|y| y * scale).collect();
        let s = smooth(&train.with_responses(shifted).unwrap(), &config, &x).unwrap();
        let m = smooth(&train.with_responses(scaled).unwrap(), &config, &x).unwrap();
        prop_assert!((s.value - (base.value + shift)).abs() <= 1e-12 * (shift.abs() + 3.0) * 4.0);
        prop_assert!((m.value - base.value * scale).abs() <= 1e-12 * scale * 3.0 * 4.0);
        prop_assert_eq!(s.degenerate, base.degenerate);
    }

    #[test]
    fn output_lies_in_hull_of_contributing_responses(seed in any::<u64>()) {
        let Case { train, x, config } = case(seed);
        let out = smooth(&train, &config, &x).unwrap();
        let d: Vec<f64> = train
            .curves()
            .iter()
            .map(|c| semi_metric(&config.semimetric, &x, c).unwrap())
            .collect();
        let radius = match config.tuning {
            Tuning::Bandwidth(h) => h,
            Tuning::Neighbours(k) => knn_bandwidth(&train, &config.semimetric, &x, k + 1).unwrap(),
        };
        let dmin = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let members: Vec<f64> = d
            .iter()
            .zip(train.responses())
            .filter(|(di, _)| **di <= radius || (out.degenerate && **di <= dmin))
            .map(|(_, y)| *y)
            .collect();
        let lo = members.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = members.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(out.value >= lo - 1e-12 && out.value <= hi + 1e-12, "{} not in [{lo}, {hi}]", out.value);
    }

    #[test]
    fn rescaled_direction_with_rescaled_bandwidth(seed in any::<u64>(), c in 0.05f64..20.0) {
        let Case { train, x, config } = case(seed);
        let SemiMetricKind::Projection(theta) = &config.semimetric else { unreachable!() };
        let d1 = semi_metric(&config.semimetric, &x, &train.curves()[0]).unwrap();
        let scaled_metric = SemiMetricKind::Projection(theta.scaled(c));
        let d2 = semi_metric(&scaled_metric, &x, &train.curves()[0]).unwrap();
        prop_assert!((d2 - c * d1).abs() <= 1e-12 * (c * d1).max(1e-12));

        // stay clear of points sitting exactly on the bandwidth boundary
        let h = match config.tuning {
            Tuning::Bandwidth(h) => h,
            Tuning::Neighbours(_) => 1.0,
        };
        let near_edge = train.curves().iter().any(|xi| {
            let di = semi_metric(&config.semimetric, &x, xi).unwrap();
            (di / h - 1.0).abs() < 1e-9
        });
        prop_assume!(!near_edge);
        let base = smooth(&train, &SmootherConfig { tuning: Tuning::Bandwidth(h), ..config.clone() }, &x).unwrap();
        let other = smooth(
            &train,
            &SmootherConfig { kernel: config.kernel, semimetric: scaled_metric, tuning: Tuning::Bandwidth(c * h) },
            &x,
        )
        .unwrap();
        prop_assert!((base.value - other.value).abs() <= 1e-12 * base.value.abs().max(1.0), "{} vs {}", base.value, other.value);
    }

    #[test]
    fn loo_ignores_the_left_out_response(seed in any::<u64>(), bump in -1e6f64..1e6) {
        let Case { train, config, .. } = case(seed);
        prop_assume!(train.len() >= 3);
        let config = match config.tuning {
            Tuning::Neighbours(k) if k > train.len() - 2 => SmootherConfig { tuning: Tuning::Neighbours(train.len() - 2), ..config },
            _ => config,
        };
        for j in 0..train.len() {
            let mut y = train.responses().to_vec();
            y[j] += bump;
            let a = smooth_loo(&train, &config, j).unwrap();
            let b = smooth_loo(&train.with_responses(y).unwrap(), &config, j).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
