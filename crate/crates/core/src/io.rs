//! Plain-text formats: curve and response CSVs, CV tables, direction records,
//! persisted models and the Tecator spectra layout.
//!
//! Floats are written with `Display`, which prints the shortest decimal that
//! parses back to the same `f64`, so every record round-trips bit for bit.

use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::basis::{BasisSpec, Direction};
use crate::curves::{derivative_curve, Curve, Grid};
use crate::error::{FsimError, Result};
use crate::estimators::{KernelKind, Tuning};
use crate::selection::CvResult;

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| FsimError::Format(format!("{what}: cannot parse {field:?} as a number")))
}

fn parse_usize(field: &str, what: &str) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|_| FsimError::Format(format!("{what}: cannot parse {field:?} as an index")))
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn split_list<T>(text: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(parse).collect()
}

fn reader_builder() -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.has_headers(false).trim(csv::Trim::All).flexible(true);
    b
}

/// Reads curves stored as: first row = grid points, then one curve per row.
pub fn read_curves<R: Read>(input: R) -> Result<(Arc<Grid>, Vec<Curve>)> {
    let mut reader = reader_builder().from_reader(input);
    let mut records = reader.records();
    let first = records
        .next()
        .ok_or_else(|| FsimError::Format("curve file is empty; expected a grid row".into()))??;
    let points = first
        .iter()
        .map(|f| parse_f64(f, "grid row"))
        .collect::<Result<Vec<_>>>()?;
    let grid = Arc::new(Grid::new(points)?);
    let mut curves = Vec::new();
    for (row, record) in records.enumerate() {
        let record = record?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != grid.len() {
            return Err(FsimError::Dimension(format!(
                "curve row {} has {} values, the grid has {}",
                row + 1,
                record.len(),
                grid.len()
            )));
        }
        let values = record
            .iter()
            .map(|f| parse_f64(f, &format!("curve row {}", row + 1)))
            .collect::<Result<Vec<_>>>()?;
        curves.push(Curve::new(grid.clone(), values)?);
    }
    Ok((grid, curves))
}

pub fn write_curves<W: Write>(out: W, grid: &Grid, curves: &[Curve]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(grid.points().iter().map(ToString::to_string))?;
    for c in curves {
        w.write_record(c.values().iter().map(ToString::to_string))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a one-column response file. A non-numeric first line is a header.
pub fn read_responses<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut reader = reader_builder().from_reader(input);
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = record.get(0).unwrap_or("");
        if field.is_empty() {
            continue;
        }
        if record.len() != 1 {
            return Err(FsimError::Format(format!(
                "response row {} has {} columns, expected 1",
                row + 1,
                record.len()
            )));
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if row == 0 => {}
            Err(_) => {
                return Err(FsimError::Format(format!(
                    "response row {}: {field:?}",
                    row + 1
                )))
            }
        }
    }
    Ok(out)
}

pub fn write_responses<W: Write>(mut out: W, responses: &[f64]) -> Result<()> {
    writeln!(out, "response")?;
    for y in responses {
        writeln!(out, "{y}")?;
    }
    Ok(())
}

/// Reads one index per line (or comma separated); blank lines are ignored.
pub fn read_indices<R: BufRead>(input: R) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        for field in line.split(',') {
            if !field.trim().is_empty() {
                out.push(parse_usize(field, "index file")?);
            }
        }
    }
    Ok(out)
}

/// One row per (tuning position, direction) cell.
pub fn write_cv_csv<W: Write>(out: W, cv: &CvResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["direction", "tuning", "criterion", "degenerate"])?;
    for t in 0..cv.positions() {
        for m in 0..cv.directions() {
            w.write_record([
                m.to_string(),
                cv.tuning_values[t][m].to_string(),
                cv.criterion[t][m].to_string(),
                cv.degenerate[t][m].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn basis_lines(spec: &BasisSpec) -> String {
    let (min, max) = spec.domain();
    format!(
        "basis.order = {}\nbasis.interior_knots = {}\nbasis.min = {min}\nbasis.max = {max}\n",
        spec.order(),
        spec.interior_knots()
    )
}

/// Flat `key = value` record; `#` starts a comment line.
#[derive(Debug, Clone, Default)]
pub struct Record {
    entries: Vec<(String, String)>,
}

impl Record {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                FsimError::Format(format!("line {}: expected `key = value`", i + 1))
            })?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| FsimError::Format(format!("missing key `{key}`")))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        parse_f64(self.require(key)?, key)
    }

    fn usize(&self, key: &str) -> Result<usize> {
        parse_usize(self.require(key)?, key)
    }

    fn basis(&self) -> Result<BasisSpec> {
        BasisSpec::new(
            self.usize("basis.order")?,
            self.usize("basis.interior_knots")?,
            self.f64("basis.min")?,
            self.f64("basis.max")?,
        )
    }
}

pub fn direction_record(theta: &Direction) -> String {
    format!(
        "{}coefficients = {}\n",
        basis_lines(theta.spec()),
        join(theta.coefficients())
    )
}

pub fn parse_direction_record(text: &str) -> Result<Direction> {
    let rec = Record::parse(text)?;
    let coefficients = split_list(rec.require("coefficients")?, |f| {
        parse_f64(f, "coefficients")
    })?;
    Direction::new(rec.basis()?, coefficients)
}

/// One row per direction, one column per basis coefficient.
pub fn write_direction_set<W: Write>(out: W, directions: &[Direction]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let dim = directions.first().map_or(0, |d| d.coefficients().len());
    w.write_record((0..dim).map(|j| format!("c{j}")))?;
    for d in directions {
        w.write_record(d.coefficients().iter().map(ToString::to_string))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_direction_set<R: Read>(input: R, spec: &BasisSpec) -> Result<Vec<Direction>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let coefficients = record?
            .iter()
            .map(|f| parse_f64(f, &format!("direction row {}", row + 1)))
            .collect::<Result<Vec<_>>>()?;
        out.push(Direction::new(spec.clone(), coefficients)?);
    }
    Ok(out)
}

/// How raw curves are turned into the model covariate: `order = 0` keeps them
/// as they are, otherwise a least-squares spline fit is differentiated.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSpec {
    pub order: usize,
    pub basis_order: usize,
    pub interior_knots: usize,
}

impl DerivativeSpec {
    pub const DEFAULT_BASIS_ORDER: usize = 4;
    pub const DEFAULT_INTERIOR_KNOTS: usize = 20;

    pub fn new(order: usize) -> Self {
        Self {
            order,
            basis_order: Self::DEFAULT_BASIS_ORDER,
            interior_knots: Self::DEFAULT_INTERIOR_KNOTS,
        }
    }

    pub fn apply(&self, curves: &[Curve]) -> Result<Vec<Curve>> {
        if self.order == 0 {
            return Ok(curves.to_vec());
        }
        let Some(first) = curves.first() else {
            return Ok(Vec::new());
        };
        let spec = BasisSpec::on_grid(self.basis_order, self.interior_knots, first.grid())?;
        curves
            .iter()
            .map(|c| derivative_curve(c, self.order, &spec))
            .collect()
    }
}

/// Everything needed to rebuild a fitted single-index model from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRecord {
    pub direction: Direction,
    pub tuning: Tuning,
    pub kernel: KernelKind,
    pub curves_path: PathBuf,
    pub responses_path: PathBuf,
    /// Rows of the data files used for training, in order.
    pub train_indices: Vec<usize>,
    pub derivative: DerivativeSpec,
    pub best_score: f64,
}

impl ModelRecord {
    pub fn to_text(&self) -> String {
        let (kind, value) = match self.tuning {
            Tuning::Bandwidth(h) => ("bandwidth", h.to_string()),
            Tuning::Neighbours(k) => ("neighbours", k.to_string()),
        };
        format!(
            "# fsim model\n{}coefficients = {}\ntuning.kind = {kind}\ntuning.value = {value}\n\
             kernel = {}\ndata.curves = {}\ndata.responses = {}\ndata.train_indices = {}\n\
             derivative.order = {}\nderivative.basis_order = {}\nderivative.interior_knots = {}\n\
             cv.best_score = {}\n",
            basis_lines(self.direction.spec()),
            join(self.direction.coefficients()),
            self.kernel.name(),
            self.curves_path.display(),
            self.responses_path.display(),
            join(&self.train_indices),
            self.derivative.order,
            self.derivative.basis_order,
            self.derivative.interior_knots,
            self.best_score,
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let rec = Record::parse(text)?;
        let coefficients = split_list(rec.require("coefficients")?, |f| {
            parse_f64(f, "coefficients")
        })?;
        let direction = Direction::new(rec.basis()?, coefficients)?;
        let tuning = match rec.require("tuning.kind")? {
            "bandwidth" => Tuning::Bandwidth(rec.f64("tuning.value")?),
            "neighbours" => Tuning::Neighbours(rec.usize("tuning.value")?),
            other => {
                return Err(FsimError::Format(format!("unknown tuning kind {other:?}")));
            }
        };
        Ok(Self {
            direction,
            tuning,
            kernel: KernelKind::parse(rec.require("kernel")?)?,
            curves_path: PathBuf::from(rec.require("data.curves")?),
            responses_path: PathBuf::from(rec.require("data.responses")?),
            train_indices: split_list(rec.require("data.train_indices")?, |f| {
                parse_usize(f, "data.train_indices")
            })?,
            derivative: DerivativeSpec {
                order: rec.usize("derivative.order")?,
                basis_order: rec.usize("derivative.basis_order")?,
                interior_knots: rec.usize("derivative.interior_knots")?,
            },
            best_score: rec.f64("cv.best_score")?,
        })
    }

    /// Resolves the data paths relative to `base` when they are relative.
    pub fn resolve(&self, base: &Path) -> (PathBuf, PathBuf) {
        let fix = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        (fix(&self.curves_path), fix(&self.responses_path))
    }
}

/// Grid of the 100 Tecator absorbance channels (nm).
pub fn tecator_grid() -> Grid {
    Grid::new((0..100).map(|i| 851.0 + 2.0 * i as f64).collect()).expect("increasing grid")
}

/// Parses Tecator spectra. Each sample is 100 absorbances followed either by
/// the fat content alone (101 numbers) or by 22 principal components,
/// moisture, fat and protein (125 numbers, the public StatLib layout).
/// Samples may sit one per line or be wrapped over several lines.
pub fn read_tecator<R: BufRead>(input: R) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut lines: Vec<Vec<f64>> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
            .filter(|f| !f.is_empty())
            .collect();
        if fields.is_empty() {
            continue;
        }
        match fields
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
        {
            Ok(v) => lines.push(v),
            Err(_) if lines.is_empty() && i < 1 => {}
            Err(_) => {
                return Err(FsimError::Format(format!(
                    "tecator line {}: not numeric",
                    i + 1
                )));
            }
        }
    }
    let widths: Vec<usize> = lines.iter().map(Vec::len).collect();
    let width = if !widths.is_empty() && widths.iter().all(|&w| w == 101) {
        101
    } else if !widths.is_empty() && widths.iter().all(|&w| w == 125) {
        125
    } else {
        0
    };
    let samples: Vec<Vec<f64>> = if width > 0 {
        lines
    } else {
        let flat: Vec<f64> = lines.into_iter().flatten().collect();
        if flat.is_empty() || !flat.len().is_multiple_of(125) {
            return Err(FsimError::Format(format!(
                "cannot split {} numbers into 101- or 125-column Tecator samples",
                flat.len()
            )));
        }
        flat.chunks(125).map(<[f64]>::to_vec).collect()
    };
    let fat_column = if samples[0].len() == 101 { 100 } else { 123 };
    let mut spectra = Vec::with_capacity(samples.len());
    let mut fat = Vec::with_capacity(samples.len());
    for s in samples {
        fat.push(s[fat_column]);
        spectra.push(s[..100].to_vec());
    }
    Ok((spectra, fat))
}

/// A CV summary carrying only the best score, for models loaded from disk.
pub fn cv_summary(tuning: Tuning, best_score: f64) -> CvResult {
    CvResult {
        tuning_values: vec![vec![tuning.value()]],
        criterion: vec![vec![best_score]],
        degenerate: vec![vec![false]],
        neighbours: matches!(tuning, Tuning::Neighbours(_)),
        best_position: 0,
        best_direction: 0,
        best_score,
        degenerate_count: 0,
    }
}
