mod common;

use std::collections::BTreeSet;
use std::fs;
use std::sync::Arc;

use common::*;
use fsim::curves::{Curve, Grid};
use fsim::estimators::{fsim_predict, TrainingSet};
use fsim::io;
use fsim::selection::{fit_fsim, FitOptions};

#[test]
fn predicting_training_file_reproduces_fitted_values() {
    let tmp = tempfile::tempdir().unwrap();
    let (c, r) = simulated_dataset(tmp.path(), 40, 3);
    let idx = tmp.path().join("train.txt");
    write_indices(&idx, 0..40);
    let out = tmp.path().join("fit");
    assert_ok(&run(&[
        "fit",
        "--curves",
        s(&c),
        "--responses",
        s(&r),
        "--train-idx",
        s(&idx),
        "--out",
        s(&out),
    ]));
    let pred = tmp.path().join("pred.csv");
    assert_ok(&run(&[
        "predict",
        "--model",
        s(&out.join("model.txt")),
        "--curves",
        s(&c),
        "--out",
        s(&pred),
    ]));

    let fitted = read_csv_column(&out.join("fitted.csv"), "prediction");
    let all = read_csv_column(&pred, "prediction");
    assert_eq!(all.len(), 65);
    assert_eq!(&all[..40], &fitted[..]);

    let test_pred = read_csv_column(&out.join("test_predictions.csv"), "prediction");
    assert_eq!(&all[40..], &test_pred[..]);
    assert_eq!(read_csv_column(&pred, "degenerate").len(), 65);
}

#[test]
fn held_out_rows_match_library_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let (c, r) = simulated_dataset(tmp.path(), 20, 9);
    let idx = tmp.path().join("train.txt");
    write_indices(&idx, 0..40);
    let out = tmp.path().join("fit");
    assert_ok(&run(&[
        "fit",
        "--curves",
        s(&c),
        "--responses",
        s(&r),
        "--train-idx",
        s(&idx),
        "--out",
        s(&out),
    ]));

    // five held-out rows in their own file
    let (grid, curves) = io::read_curves(fs::File::open(&c).unwrap()).unwrap();
    let y = io::read_responses(fs::File::open(&r).unwrap()).unwrap();
    let held: Vec<Curve> = curves[40..45].to_vec();
    let held_path = tmp.path().join("held.csv");
    let mut buf = Vec::new();
    io::write_curves(&mut buf, &grid, &held).unwrap();
    fs::write(&held_path, buf).unwrap();
    let pred = tmp.path().join("pred.csv");
    assert_ok(&run(&[
        "predict",
        "--model",
        s(&out.join("model.txt")),
        "--curves",
        s(&held_path),
        "--out",
        s(&pred),
    ]));

    let train = TrainingSet::new(curves[..40].to_vec(), y[..40].to_vec()).unwrap();
    let fit = fit_fsim(Arc::new(train), &FitOptions::default()).unwrap();
    let expected: Vec<String> = fsim_predict(&fit, &held)
        .unwrap()
        .iter()
        .map(f64::to_string)
        .collect();
    assert_eq!(read_csv_column(&pred, "prediction"), expected);
}

#[test]
fn empty_and_mismatched_curve_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (c, r) = simulated_dataset(tmp.path(), 12, 1);
    let out = tmp.path().join("fit");
    assert_ok(&run(&[
        "fit",
        "--curves",
        s(&c),
        "--responses",
        s(&r),
        "--out",
        s(&out),
    ]));
    let model = out.join("model.txt");

    for (name, text) in [
        ("empty.csv", String::new()),
        (
            "grid_only.csv",
            fs::read_to_string(&c)
                .unwrap()
                .lines()
                .next()
                .unwrap()
                .to_string(),
        ),
    ] {
        let f = tmp.path().join(name);
        fs::write(&f, text).unwrap();
        let pred = tmp.path().join(format!("{name}.out"));
        assert_ok(&run(&[
            "predict",
            "--model",
            s(&model),
            "--curves",
            s(&f),
            "--out",
            s(&pred),
        ]));
        assert_eq!(
            fs::read_to_string(&pred).unwrap(),
            "row,prediction,degenerate\n"
        );
    }

    let g = Arc::new(Grid::uniform(0.0, 1.0, 50).unwrap());
    let other = tmp.path().join("other.csv");
    let mut buf = Vec::new();
    io::write_curves(&mut buf, &g, &[Curve::from_fn(g.clone(), |t| t).unwrap()]).unwrap();
    fs::write(&other, buf).unwrap();
    let res = run(&[
        "predict",
        "--model",
        s(&model),
        "--curves",
        s(&other),
        "--out",
        s(&tmp.path().join("x.csv")),
    ]);
    assert_eq!(code(&res), 3);
    assert!(String::from_utf8_lossy(&res.stderr).contains("grid"));
}

#[test]
fn constant_response_model() {
    let tmp = tempfile::tempdir().unwrap();
    let g = Arc::new(Grid::uniform(0.0, 1.0, 30).unwrap());
    let curves: Vec<Curve> = (0..12)
        .map(|i| {
            Curve::from_fn(g.clone(), move |t| {
                (i as f64 + 1.0) * t + (3.0 * t * i as f64).sin()
            })
            .unwrap()
        })
        .collect();
    let (c, r) = write_dataset(tmp.path(), &curves, &[4.25; 12]);
    let out = tmp.path().join("fit");
    assert_ok(&run(&[
        "fit",
        "--curves",
        s(&c),
        "--responses",
        s(&r),
        "--out",
        s(&out),
    ]));
    let score: f64 = report_value(&out.join("report.txt"), "cv_best_score")
        .parse()
        .unwrap();
    assert!(score < 1e-25);
    let pred = tmp.path().join("p.csv");
    assert_ok(&run(&[
        "predict",
        "--model",
        s(&out.join("model.txt")),
        "--curves",
        s(&c),
        "--out",
        s(&pred),
    ]));
    for v in read_csv_column(&pred, "prediction") {
        assert!((v.parse::<f64>().unwrap() - 4.25).abs() < 1e-12);
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let (c, r) = simulated_dataset(tmp.path(), 12, 2);
    let missing = tmp.path().join("nope.csv");
    assert_eq!(
        code(&run(&[
            "fit",
            "--curves",
            s(&missing),
            "--responses",
            s(&r)
        ])),
        3
    );
    assert_eq!(
        code(&run(&[
            "fit",
            "--curves",
            s(&c),
            "--responses",
            s(&r),
            "--smoother",
            "spline"
        ])),
        2
    );
    assert_eq!(
        code(&run(&[
            "fit",
            "--curves",
            s(&c),
            "--responses",
            s(&r),
            "--derivative",
            "3"
        ])),
        2
    );
    assert_eq!(code(&run(&["simulate", "--replicates", "0"])), 2);
    assert_eq!(code(&run(&["no-such-command"])), 2);
    assert_eq!(
        code(&run(&[
            "fit",
            "--curves",
            s(&c),
            "--responses",
            s(&r),
            "--train-size",
            "500"
        ])),
        2
    );

    // identical curves leave no usable projected distance
    let g = Arc::new(Grid::uniform(0.0, 1.0, 20).unwrap());
    let same = vec![Curve::from_fn(g.clone(), |t| t * t).unwrap(); 8];
    let y: Vec<f64> = (0..8).map(f64::from).collect();
    let dir = tmp.path().join("flat");
    let (c2, r2) = write_dataset(&dir, &same, &y);
    let res = run(&[
        "fit",
        "--curves",
        s(&c2),
        "--responses",
        s(&r2),
        "--out",
        s(&dir.join("o")),
    ]);
    assert_eq!(code(&res), 4, "{}", String::from_utf8_lossy(&res.stderr));

    // mismatched response count
    let short = tmp.path().join("short.csv");
    fs::write(&short, "response\n1\n2\n").unwrap();
    assert_eq!(
        code(&run(&["fit", "--curves", s(&c), "--responses", s(&short)])),
        3
    );
}

#[test]
fn zero_residual_boost_leaves_predictions_unchanged() {
    let tmp = tempfile::tempdir().unwrap();
    let rep =
        fsim::simulation::generate_replicate(&fsim::simulation::SimDesign::new(30, 5)).unwrap();
    let curves: Vec<Curve> = rep
        .train
        .curves()
        .iter()
        .chain(rep.test.curves())
        .cloned()
        .collect();
    let (c, r) = write_dataset(tmp.path(), &curves, &vec![0.0; curves.len()]);
    let idx = tmp.path().join("train.txt");
    write_indices(&idx, 0..30);
    let out = tmp.path().join("fit");
    assert_ok(&run(&[
        "fit",
        "--curves",
        s(&c),
        "--responses",
        s(&r),
        "--train-idx",
        s(&idx),
        "--out",
        s(&out),
    ]));
    let b = tmp.path().join("boost");
    assert_ok(&run(&[
        "boost",
        "--model",
        s(&out.join("model.txt")),
        "--out",
        s(&b),
    ]));
    let preds = b.join("boost_predictions.csv");
    assert_eq!(
        read_csv_column(&preds, "base"),
        read_csv_column(&preds, "combined")
    );
    assert_eq!(
        report_value(&b.join("boost_report.txt"), "boost_derivative"),
        "1"
    );
}

#[test]
fn boosting_pure_noise_is_not_an_improvement() {
    let tmp = tempfile::tempdir().unwrap();
    let rep =
        fsim::simulation::generate_replicate(&fsim::simulation::SimDesign::new(60, 8)).unwrap();
    let curves: Vec<Curve> = rep
        .train
        .curves()
        .iter()
        .chain(rep.test.curves())
        .cloned()
        .collect();
    // responses unrelated to the curves
    let y: Vec<f64> = (0..curves.len())
        .map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0)
        .collect();
    let (c, r) = write_dataset(tmp.path(), &curves, &y);
    let idx = tmp.path().join("train.txt");
    write_indices(&idx, 0..60);
    let out = tmp.path().join("fit");
    assert_ok(&run(&[
        "fit",
        "--curves",
        s(&c),
        "--responses",
        s(&r),
        "--train-idx",
        s(&idx),
        "--out",
        s(&out),
    ]));
    let b = tmp.path().join("boost");
    assert_ok(&run(&[
        "boost",
        "--model",
        s(&out.join("model.txt")),
        "--k-max-frac",
        "0.04",
        "--out",
        s(&b),
    ]));
    let report = b.join("boost_report.txt");
    assert_eq!(report_value(&report, "residual_tuning"), "2");
    assert_eq!(report_value(&report, "improving"), "false");
}

#[test]
fn splits_are_disjoint_covers_and_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let (c, r) = simulated_dataset(tmp.path(), 30, 4);
    let args = |out: &str| {
        vec![
            "splits-study".to_string(),
            "--curves".into(),
            s(&c).into(),
            "--responses".into(),
            s(&r).into(),
            "--n".into(),
            "20,40".into(),
            "--partitions".into(),
            "2".into(),
            "--seed".into(),
            "3".into(),
            "--out".into(),
            out.to_string(),
        ]
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_ok(&fsim_bin().args(args(s(&a))).output().unwrap());
    assert_ok(&fsim_bin().args(args(s(&b))).output().unwrap());
    assert_eq!(snapshot(&a), snapshot(&b));

    let text = fs::read_to_string(a.join("partitions.csv")).unwrap();
    for n in [20usize, 40] {
        for p in 0..2 {
            let mut train = BTreeSet::new();
            let mut test = BTreeSet::new();
            for line in text.lines().skip(1) {
                let f: Vec<&str> = line.split(',').collect();
                if f[0] == n.to_string() && f[1] == p.to_string() {
                    let row: usize = f[2].parse().unwrap();
                    let fresh = if f[3] == "train" {
                        train.insert(row)
                    } else {
                        test.insert(row)
                    };
                    assert!(fresh);
                }
            }
            assert_eq!(train.len(), n);
            assert!(train.is_disjoint(&test));
            assert_eq!(train.len() + test.len(), 55);
        }
    }
    let mut too_big = args(s(&tmp.path().join("c")));
    too_big[6] = "55".into();
    assert_eq!(code(&fsim_bin().args(too_big).output().unwrap()), 2);
}

#[test]
fn tecator_import_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let mut text = String::new();
    for s in 0..3 {
        let mut row: Vec<String> = (0..100)
            .map(|j| format!("{}", 2.5 + (j as f64) / 1000.0 + s as f64))
            .collect();
        row.push(format!("{}", 10 + s));
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    let input = tmp.path().join("tecator.txt");
    fs::write(&input, text).unwrap();
    let out = tmp.path().join("t");
    assert_ok(&run(&[
        "tecator-import",
        "--input",
        s(&input),
        "--out",
        s(&out),
    ]));
    let (grid, curves) = io::read_curves(fs::File::open(out.join("curves.csv")).unwrap()).unwrap();
    assert_eq!((grid.min(), grid.max(), grid.len()), (851.0, 1049.0, 100));
    assert_eq!(curves.len(), 3);
    assert_eq!(
        io::read_responses(fs::File::open(out.join("responses.csv")).unwrap()).unwrap(),
        vec![10.0, 11.0, 12.0]
    );
}
