use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fsim::basis::eval_direction;
use fsim::curves::{Curve, Grid};
use fsim::estimators::{KernelKind, TrainingSet};
use fsim::io::{self, DerivativeSpec, ModelRecord};
use fsim::selection::{self, FitOptions, FittedFsim, SmootherKind};
use fsim::simulation::{self, SimDesign};
use fsim::FsimError;

/// Exit status for invalid flags or parameters.
const EXIT_USAGE: u8 = 2;
/// Exit status for unreadable, missing or malformed input.
const EXIT_INPUT: u8 = 3;
/// Exit status when the only failure is numerical degeneracy.
const EXIT_DEGENERATE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "fsim",
    version,
    about = "Functional single-index regression with cross-validated direction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Seeded Monte-Carlo study on the synthetic cubic-link design
    Simulate(SimulateArgs),
    /// Fit a single-index model on a curve data set
    Fit(FitArgs),
    /// Predict new curves with a persisted model
    Predict(PredictArgs),
    /// Fit the base model's residuals on a derivative covariate
    Boost(BoostArgs),
    /// Mean test MSEP over random train/test partitions
    SplitsStudy(SplitsArgs),
    /// Convert a Tecator spectra file into curve and response CSVs
    TecatorImport(ImportArgs),
}

#[derive(Args, Clone)]
struct ModelFlags {
    #[arg(long, default_value = "knn")]
    smoother: String,
    #[arg(long, default_value = "epanechnikov")]
    kernel: String,
    /// Spline order of the direction basis
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Candidate interior knot counts, e.g. "3" or "2,3,4,5,6"
    #[arg(long, default_value = "3")]
    knots: String,
    #[arg(
        long = "seeds-set",
        default_value = "-1,0,1",
        allow_hyphen_values = true
    )]
    seeds_set: String,
    /// Positivity point for candidate directions (default: grid midpoint)
    #[arg(long, allow_hyphen_values = true)]
    t0: Option<f64>,
    #[arg(long = "h-grid-size", default_value_t = 20)]
    h_grid_size: usize,
    #[arg(long = "k-max-frac", default_value_t = 0.95)]
    k_max_frac: f64,
    /// Upper bound on the number of k values after thinning
    #[arg(long = "k-grid-len", default_value_t = 50)]
    k_grid_len: usize,
}

#[derive(Args, Clone)]
struct DataFlags {
    #[arg(long)]
    curves: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    /// Derivative of the curves used as covariate (0, 1 or 2)
    #[arg(long, default_value_t = 0)]
    derivative: usize,
    /// Spline order of the least-squares fit used for derivatives
    #[arg(long = "derivative-order", default_value_t = DerivativeSpec::DEFAULT_BASIS_ORDER)]
    derivative_basis_order: usize,
    /// Interior knots of the least-squares fit used for derivatives
    #[arg(long = "derivative-knots", default_value_t = DerivativeSpec::DEFAULT_INTERIOR_KNOTS)]
    derivative_knots: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// Training sample sizes
    #[arg(long, default_value = "50,100,200")]
    n: String,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "noise-ratio", default_value_t = 0.025)]
    noise_ratio: f64,
    /// Fit on raw responses instead of training-standardized ones
    #[arg(long = "raw-scale")]
    raw_scale: bool,
    /// Smoothers to compare
    #[arg(long = "smoothers", default_value = "kernel,knn")]
    smoothers: String,
    /// Single knot count and thinned tuning grids
    #[arg(long)]
    fast: bool,
    #[arg(long, default_value = "fsim-out")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    model: ModelFlags,
    /// File of 0-based training row indices; the other rows form the test set
    #[arg(long = "train-idx", conflicts_with = "train_size")]
    train_idx: Option<PathBuf>,
    /// Random training subset of this size (drawn with --seed)
    #[arg(long = "train-size")]
    train_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "fsim-out")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    curves: PathBuf,
    /// Output CSV file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BoostArgs {
    #[arg(long)]
    model: PathBuf,
    /// Derivative order of the boosting covariate
    #[arg(long, default_value_t = 1)]
    derivative: usize,
    /// Smoother family of the residual fit (default: the base model's)
    #[arg(long)]
    smoother: Option<String>,
    #[arg(long = "h-grid-size", default_value_t = 20)]
    h_grid_size: usize,
    #[arg(long = "k-max-frac", default_value_t = 0.95)]
    k_max_frac: f64,
    #[arg(long = "k-grid-len", default_value_t = 50)]
    k_grid_len: usize,
    #[arg(long, default_value = "fsim-out")]
    out: PathBuf,
}

#[derive(Args)]
struct SplitsArgs {
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    model: ModelFlags,
    /// Training sizes to study
    #[arg(long, default_value = "50,100,160")]
    n: String,
    #[arg(long, default_value_t = 20)]
    partitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "fsim-out")]
    out: PathBuf,
}

#[derive(Args)]
struct ImportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "tecator")]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Input(String),
    Degenerate(String),
}

impl From<FsimError> for CliError {
    fn from(e: FsimError) -> Self {
        match e {
            FsimError::Io(_)
            | FsimError::Format(_)
            | FsimError::Dimension(_)
            | FsimError::InvalidGrid(_) => CliError::Input(e.to_string()),
            FsimError::Degenerate(_)
            | FsimError::DegenerateDirection(_)
            | FsimError::EmptyDirectionSet(_)
            | FsimError::Fit(_) => CliError::Degenerate(e.to_string()),
            FsimError::Parameter(_) | FsimError::Domain { .. } => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| usage(format!("{what}: cannot parse {s:?}")))
        })
        .collect()
}

impl ModelFlags {
    fn options(&self) -> CliResult<FitOptions> {
        let knots: Vec<usize> = parse_list(&self.knots, "--knots")?;
        if knots.is_empty() {
            return Err(usage("--knots needs at least one value"));
        }
        let seeds: Vec<f64> = parse_list(&self.seeds_set, "--seeds-set")?;
        if !(self.k_max_frac > 0.0 && self.k_max_frac <= 1.0) {
            return Err(usage("--k-max-frac must lie in (0, 1]"));
        }
        if self.h_grid_size < 2 {
            return Err(usage("--h-grid-size must be at least 2"));
        }
        Ok(FitOptions {
            smoother: SmootherKind::parse(&self.smoother)?,
            kernel: KernelKind::parse(&self.kernel)?,
            basis_order: self.order,
            interior_knots: knots,
            seeds,
            t0: self.t0,
            h_grid_size: self.h_grid_size,
            k_max_frac: self.k_max_frac,
            k_grid_max_len: self.k_grid_len,
        })
    }
}

impl DataFlags {
    fn derivative(&self) -> CliResult<DerivativeSpec> {
        if self.derivative > 2 {
            return Err(usage("--derivative must be 0, 1 or 2"));
        }
        Ok(DerivativeSpec {
            order: self.derivative,
            basis_order: self.derivative_basis_order,
            interior_knots: self.derivative_knots,
        })
    }
}

/// Curves and responses read from disk, with the covariate transform applied.
struct Dataset {
    curves_path: PathBuf,
    responses_path: PathBuf,
    curves: Vec<Curve>,
    responses: Vec<f64>,
}

fn open(path: &Path) -> CliResult<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_curve_file(path: &Path) -> CliResult<(Arc<Grid>, Vec<Curve>)> {
    io::read_curves(open(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_dataset(
    curves_path: &Path,
    responses: &Path,
    derivative: &DerivativeSpec,
) -> CliResult<Dataset> {
    let (_, raw) = read_curve_file(curves_path)?;
    let y = io::read_responses(open(responses)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", responses.display())))?;
    if raw.len() != y.len() {
        return Err(CliError::Input(format!(
            "{} curves but {} responses",
            raw.len(),
            y.len()
        )));
    }
    let curves = derivative.apply(&raw)?;
    let canonical = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    Ok(Dataset {
        curves_path: canonical(curves_path),
        responses_path: canonical(responses),
        curves,
        responses: y,
    })
}

impl Dataset {
    fn subset(&self, rows: &[usize]) -> CliResult<TrainingSet> {
        let curves = rows.iter().map(|&i| self.curves[i].clone()).collect();
        let y = rows.iter().map(|&i| self.responses[i]).collect();
        Ok(TrainingSet::new(curves, y)?)
    }

    fn len(&self) -> usize {
        self.responses.len()
    }
}

fn complement(n: usize, rows: &[usize]) -> Vec<usize> {
    let mut used = vec![false; n];
    for &i in rows {
        used[i] = true;
    }
    (0..n).filter(|&i| !used[i]).collect()
}

fn random_split(n: usize, size: usize, seed: u64) -> CliResult<Vec<usize>> {
    if size > n {
        return Err(usage(format!(
            "training size {size} exceeds the {n} available rows"
        )));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = rows[..size].to_vec();
    train.sort_unstable();
    Ok(train)
}

fn check_indices(n: usize, rows: &[usize]) -> CliResult<()> {
    let mut seen = vec![false; n];
    for &i in rows {
        if i >= n {
            return Err(usage(format!(
                "training index {i} is out of range for {n} rows"
            )));
        }
        if seen[i] {
            return Err(usage(format!("training index {i} is repeated")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Writes `contents` to `path` through a temporary file in the same directory.
fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| CliError::Input(e.to_string()))?;
    Ok(())
}

fn write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> fsim::Result<()>) -> CliResult<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_atomic(path, &buf)
}

fn predictions_csv(rows: &[usize], preds: &[fsim::Smoothed]) -> Vec<u8> {
    let mut s = String::from("row,prediction,degenerate\n");
    for (r, p) in rows.iter().zip(preds) {
        s.push_str(&format!("{r},{},{}\n", p.value, p.degenerate));
    }
    s.into_bytes()
}

fn fit_model(train: TrainingSet, options: &FitOptions) -> CliResult<FittedFsim> {
    Ok(selection::fit_fsim(Arc::new(train), options)?)
}

fn cmd_fit(args: FitArgs) -> CliResult<()> {
    let options = args.model.options()?;
    let derivative = args.data.derivative()?;
    let data = load_dataset(&args.data.curves, &args.data.responses, &derivative)?;
    let n = data.len();
    let train_rows = match (&args.train_idx, args.train_size) {
        (Some(path), _) => io::read_indices(open(path)?)?,
        (None, Some(size)) => random_split(n, size, args.seed)?,
        (None, None) => (0..n).collect(),
    };
    check_indices(n, &train_rows)?;
    let test_rows = complement(n, &train_rows);

    let fit = fit_model(data.subset(&train_rows)?, &options)?;
    let out = &args.out;
    let record = ModelRecord {
        direction: fit.direction().clone(),
        tuning: fit.tuning(),
        kernel: fit.kernel(),
        curves_path: data.curves_path.clone(),
        responses_path: data.responses_path.clone(),
        train_indices: train_rows.clone(),
        derivative,
        best_score: fit.cv().best_score,
    };
    write_atomic(&out.join("model.txt"), record.to_text().as_bytes())?;
    write_with(&out.join("cv.csv"), |b| io::write_cv_csv(b, fit.cv()))?;

    let mut sel = String::from("interior_knots,best_score\n");
    for (m, score) in fit.model_selection() {
        sel.push_str(&format!("{m},{score}\n"));
    }
    write_atomic(&out.join("model_selection.csv"), sel.as_bytes())?;

    let grid = fit.train().grid().clone();
    let theta = eval_direction(fit.direction(), &grid)?;
    let mut dir = String::from("t,theta\n");
    for (t, v) in grid.points().iter().zip(theta.values()) {
        dir.push_str(&format!("{t},{v}\n"));
    }
    write_atomic(&out.join("direction.csv"), dir.as_bytes())?;

    let fitted = fit.fitted_values()?;
    let mut link = String::from("row,projection,fitted,response\n");
    for (((r, p), f), y) in train_rows
        .iter()
        .zip(fit.projections())
        .zip(&fitted)
        .zip(fit.train().responses())
    {
        link.push_str(&format!("{r},{p},{},{y}\n", f.value));
    }
    write_atomic(&out.join("link.csv"), link.as_bytes())?;
    write_atomic(
        &out.join("fitted.csv"),
        &predictions_csv(&train_rows, &fitted),
    )?;

    let mut report = format!(
        "smoother = {}\nkernel = {}\ninterior_knots = {}\ndirection_index = {}\ntuning = {}\ncv_best_score = {}\ntrain_rows = {}\ntest_rows = {}\n",
        options.smoother.name(),
        fit.kernel().name(),
        fit.direction().spec().interior_knots(),
        fit.cv().best_direction,
        fit.tuning().value(),
        fit.cv().best_score,
        train_rows.len(),
        test_rows.len()
    );
    if !test_rows.is_empty() {
        let test_curves: Vec<Curve> = test_rows.iter().map(|&i| data.curves[i].clone()).collect();
        let preds = fit.predict(&test_curves)?;
        let y: Vec<f64> = test_rows.iter().map(|&i| data.responses[i]).collect();
        let values: Vec<f64> = preds.iter().map(|p| p.value).collect();
        report.push_str(&format!("test_msep = {}\n", selection::msep(&y, &values)?));
        write_atomic(
            &out.join("test_predictions.csv"),
            &predictions_csv(&test_rows, &preds),
        )?;
    }
    write_atomic(&out.join("report.txt"), report.as_bytes())?;
    print!("{report}");
    Ok(())
}

fn load_model(path: &Path) -> CliResult<(ModelRecord, Dataset, FittedFsim)> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let record = ModelRecord::parse(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let (curves, responses) = record.resolve(base);
    let data = load_dataset(&curves, &responses, &record.derivative)?;
    check_indices(data.len(), &record.train_indices)?;
    let train = Arc::new(data.subset(&record.train_indices)?);
    let fit = FittedFsim::new(
        train,
        record.direction.clone(),
        record.tuning,
        record.kernel,
        io::cv_summary(record.tuning, record.best_score),
    )?;
    Ok((record, data, fit))
}

fn cmd_predict(args: PredictArgs) -> CliResult<()> {
    let (record, _, fit) = load_model(&args.model)?;
    let raw = fs::read_to_string(&args.curves)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.curves.display())))?;
    let curves = if raw.trim().is_empty() {
        Vec::new()
    } else {
        let (grid, curves) = io::read_curves(raw.as_bytes())?;
        let expected = fit.train().grid();
        if grid.points() != expected.points() {
            return Err(CliError::Input(format!(
                "curves are sampled at {} points that differ from the model's {}-point grid",
                grid.len(),
                expected.len()
            )));
        }
        record.derivative.apply(&curves)?
    };
    let preds = fit.predict(&curves)?;
    let rows: Vec<usize> = (0..curves.len()).collect();
    write_atomic(&args.out, &predictions_csv(&rows, &preds))
}

fn cmd_boost(args: BoostArgs) -> CliResult<()> {
    if args.derivative > 2 {
        return Err(usage("--derivative must be 0, 1 or 2"));
    }
    let (record, data, fit) = load_model(&args.model)?;
    let smoother = match &args.smoother {
        Some(s) => SmootherKind::parse(s)?,
        None => match record.tuning {
            fsim::Tuning::Bandwidth(_) => SmootherKind::Kernel,
            fsim::Tuning::Neighbours(_) => SmootherKind::Knn,
        },
    };
    let options = FitOptions {
        smoother,
        h_grid_size: args.h_grid_size,
        k_max_frac: args.k_max_frac,
        k_grid_max_len: args.k_grid_len,
        ..FitOptions::default()
    };
    let base = fs::canonicalize(args.model.parent().unwrap_or(Path::new(".")))?;
    let (curves_path, _) = record.resolve(&base);
    let (_, raw) = read_curve_file(&curves_path)?;
    let boost_spec = DerivativeSpec {
        order: args.derivative,
        ..record.derivative.clone()
    };
    let boost_curves = boost_spec.apply(&raw)?;

    let train_rows = &record.train_indices;
    let test_rows = complement(data.len(), train_rows);
    let pick =
        |rows: &[usize], from: &[Curve]| rows.iter().map(|&i| from[i].clone()).collect::<Vec<_>>();
    let grid = options.tuning_grid(train_rows.len())?;
    let boosted =
        selection::boost_residuals(&fit, &pick(train_rows, &boost_curves), &grid, record.kernel)?;

    let mut report = format!(
        "base_tuning = {}\nresidual_smoother = {}\nresidual_tuning = {}\nresidual_cv_best_score = {}\nboost_derivative = {}\n",
        fit.tuning().value(),
        smoother.name(),
        boosted.residual.tuning().value(),
        boosted.residual.cv().best_score,
        args.derivative
    );
    if !test_rows.is_empty() {
        let base_curves = pick(&test_rows, &data.curves);
        let extra = pick(&test_rows, &boost_curves);
        let y: Vec<f64> = test_rows.iter().map(|&i| data.responses[i]).collect();
        let base_pred: Vec<f64> = fit.predict(&base_curves)?.iter().map(|p| p.value).collect();
        let combined = boosted.predict(&base_curves, &extra)?;
        let base_msep = selection::msep(&y, &base_pred)?;
        let combined_msep = selection::msep(&y, &combined)?;
        report.push_str(&format!(
            "base_test_msep = {base_msep}\ncombined_test_msep = {combined_msep}\nimproving = {}\n",
            improving(base_msep, combined_msep)
        ));
        let mut rows = String::from("row,base,combined,response\n");
        for (((r, b), c), y) in test_rows.iter().zip(&base_pred).zip(&combined).zip(&y) {
            rows.push_str(&format!("{r},{b},{c},{y}\n"));
        }
        write_atomic(&args.out.join("boost_predictions.csv"), rows.as_bytes())?;
    }
    write_atomic(&args.out.join("boost_report.txt"), report.as_bytes())?;
    print!("{report}");
    Ok(())
}

/// Boosting counts as an improvement only when it cuts the test MSEP by more
/// than 10%.
fn improving(base: f64, combined: f64) -> bool {
    combined < 0.9 * base
}

fn cmd_splits(args: SplitsArgs) -> CliResult<()> {
    let options = args.model.options()?;
    let derivative = args.data.derivative()?;
    let sizes: Vec<usize> = parse_list(&args.n, "--n")?;
    if args.partitions == 0 {
        return Err(usage("--partitions must be at least 1"));
    }
    let data = load_dataset(&args.data.curves, &args.data.responses, &derivative)?;
    for &n in &sizes {
        if n >= data.len() {
            return Err(usage(format!(
                "training size {n} leaves no test rows out of {}",
                data.len()
            )));
        }
    }
    let smoothers = [SmootherKind::Kernel, SmootherKind::Knn];
    let mut rows = String::from("n,partition,seed,smoother,msep\n");
    let mut summary = String::from("n,smoother,mean_msep,partitions,failed\n");
    let mut membership = String::from("n,partition,row,role\n");
    let mut failures = 0;
    for &n in &sizes {
        let mut per_smoother: Vec<Vec<f64>> = vec![Vec::new(); smoothers.len()];
        for p in 0..args.partitions {
            let seed = args.seed.wrapping_add(p as u64);
            let train_rows = random_split(data.len(), n, seed)?;
            let test_rows = complement(data.len(), &train_rows);
            for (role, set) in [("train", &train_rows), ("test", &test_rows)] {
                for r in set.iter() {
                    membership.push_str(&format!("{n},{p},{r},{role}\n"));
                }
            }
            let test_curves: Vec<Curve> =
                test_rows.iter().map(|&i| data.curves[i].clone()).collect();
            let y: Vec<f64> = test_rows.iter().map(|&i| data.responses[i]).collect();
            for (s, &smoother) in smoothers.iter().enumerate() {
                let opts = FitOptions {
                    smoother,
                    ..options.clone()
                };
                let outcome = fit_model(data.subset(&train_rows)?, &opts).and_then(|fit| {
                    let pred: Vec<f64> =
                        fit.predict(&test_curves)?.iter().map(|p| p.value).collect();
                    Ok(selection::msep(&y, &pred)?)
                });
                match outcome {
                    Ok(e) => {
                        per_smoother[s].push(e);
                        rows.push_str(&format!("{n},{p},{seed},{},{e}\n", smoother.name()));
                    }
                    Err(CliError::Degenerate(msg)) => {
                        failures += 1;
                        rows.push_str(&format!(
                            "{n},{p},{seed},{},failed: {}\n",
                            smoother.name(),
                            msg.replace(',', ";")
                        ));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        for (s, &smoother) in smoothers.iter().enumerate() {
            let v = &per_smoother[s];
            let mean = simulation::pairwise_sum(v) / v.len() as f64;
            summary.push_str(&format!(
                "{n},{},{mean},{},{}\n",
                smoother.name(),
                v.len(),
                args.partitions - v.len()
            ));
        }
    }
    write_atomic(&args.out.join("splits.csv"), rows.as_bytes())?;
    write_atomic(&args.out.join("splits_summary.csv"), summary.as_bytes())?;
    write_atomic(&args.out.join("partitions.csv"), membership.as_bytes())?;
    print!("{summary}");
    if failures > 0 {
        return Err(CliError::Degenerate(format!(
            "{failures} partition fits failed"
        )));
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    if args.replicates == 0 {
        return Err(usage("--replicates must be at least 1"));
    }
    let sizes: Vec<usize> = parse_list(&args.n, "--n")?;
    let smoothers = parse_list::<String>(&args.smoothers, "--smoothers")?
        .iter()
        .map(|s| SmootherKind::parse(s))
        .collect::<fsim::Result<Vec<_>>>()?;
    let options = if args.fast {
        FitOptions::default()
    } else {
        FitOptions {
            h_grid_size: 50,
            k_grid_max_len: usize::MAX,
            ..FitOptions::default()
        }
    };

    let mut replicates = String::from("replicate,n,smoother,msep,tuning,direction,seed,status\n");
    let mut summary = String::from("n,smoother,mean_msep,sd_msep,replicates,failed\n");
    let mut failed = 0;
    for &n in &sizes {
        let design = SimDesign {
            noise_ratio: args.noise_ratio,
            standardize: !args.raw_scale,
            ..SimDesign::new(n, args.seed)
        };
        let report = simulation::run_monte_carlo(&design, args.replicates, &smoothers, &options)?;
        for r in &report.records {
            match &r.outcome {
                Ok(f) => replicates.push_str(&format!(
                    "{},{},{},{},{},{},{},ok\n",
                    r.replicate,
                    r.n,
                    r.smoother.name(),
                    f.msep,
                    f.tuning,
                    f.direction_index,
                    r.seed
                )),
                Err(msg) => replicates.push_str(&format!(
                    "{},{},{},,,,{},failed: {}\n",
                    r.replicate,
                    r.n,
                    r.smoother.name(),
                    r.seed,
                    msg.replace(',', ";")
                )),
            }
        }
        for s in &report.summary {
            failed += s.failed;
            summary.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.n,
                s.smoother.name(),
                s.mean_msep,
                s.sd_msep,
                s.replicates,
                s.failed
            ));
        }
        for &smoother in &smoothers {
            let mut curve = String::from("position,tuning,mean_cv,mean_msep\n");
            for c in report.curves.iter().filter(|c| c.smoother == smoother) {
                curve.push_str(&format!(
                    "{},{},{},{}\n",
                    c.position, c.mean_tuning, c.mean_cv, c.mean_msep
                ));
            }
            write_atomic(
                &args.out.join(format!("curve_{}_n{n}.csv", smoother.name())),
                curve.as_bytes(),
            )?;
        }
    }
    write_atomic(&args.out.join("replicates.csv"), replicates.as_bytes())?;
    write_atomic(&args.out.join("summary.csv"), summary.as_bytes())?;
    print!("{summary}");
    if failed > 0 {
        return Err(CliError::Degenerate(format!(
            "{failed} replicate fits failed"
        )));
    }
    Ok(())
}

fn cmd_import(args: ImportArgs) -> CliResult<()> {
    let (spectra, fat) = io::read_tecator(open(&args.input)?)?;
    let grid = Arc::new(io::tecator_grid());
    let curves = spectra
        .into_iter()
        .map(|v| Curve::new(grid.clone(), v))
        .collect::<fsim::Result<Vec<_>>>()?;
    write_with(&args.out.join("curves.csv"), |b| {
        io::write_curves(b, &grid, &curves)
    })?;
    write_with(&args.out.join("responses.csv"), |b| {
        io::write_responses(b, &fat)
    })?;
    println!(
        "imported {} samples into {}",
        curves.len(),
        args.out.display()
    );
    Ok(())
}

fn configure_workers() -> CliResult<()> {
    if let Ok(v) = std::env::var("FSIM_WORKERS") {
        let n: usize = v.parse().map_err(|_| {
            usage(format!(
                "FSIM_WORKERS must be a positive integer, got {v:?}"
            ))
        })?;
        if n == 0 {
            return Err(usage("FSIM_WORKERS must be a positive integer"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_workers()?;
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Boost(a) => cmd_boost(a),
        Command::SplitsStudy(a) => cmd_splits(a),
        Command::TecatorImport(a) => cmd_import(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(CliError::Degenerate(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_DEGENERATE)
        }
    }
}
