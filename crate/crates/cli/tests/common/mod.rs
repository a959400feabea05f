#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fsim::io;
use fsim::simulation::{generate_replicate, SimDesign};

pub fn fsim_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fsim"))
}

pub fn run(args: &[&str]) -> Output {
    fsim_bin().args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Writes `n + 25` simulated rows as curves.csv and responses.csv in `dir`.
pub fn simulated_dataset(dir: &Path, n: usize, seed: u64) -> (PathBuf, PathBuf) {
    let rep = generate_replicate(&SimDesign::new(n, seed))
        .unwrap()
        .standardized()
        .unwrap();
    let curves: Vec<_> = rep
        .train
        .curves()
        .iter()
        .chain(rep.test.curves())
        .cloned()
        .collect();
    let y: Vec<f64> = rep
        .train
        .responses()
        .iter()
        .chain(rep.test.responses())
        .copied()
        .collect();
    write_dataset(dir, &curves, &y)
}

pub fn write_dataset(dir: &Path, curves: &[fsim::Curve], y: &[f64]) -> (PathBuf, PathBuf) {
    fs::create_dir_all(dir).unwrap();
    let c = dir.join("curves.csv");
    let r = dir.join("responses.csv");
    let mut buf = Vec::new();
    io::write_curves(&mut buf, curves[0].grid(), curves).unwrap();
    fs::write(&c, buf).unwrap();
    let mut buf = Vec::new();
    io::write_responses(&mut buf, y).unwrap();
    fs::write(&r, buf).unwrap();
    (c, r)
}

pub fn write_indices(path: &Path, rows: impl IntoIterator<Item = usize>) {
    let text: String = rows.into_iter().map(|i| format!("{i}\n")).collect();
    fs::write(path, text).unwrap();
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// All files under `dir` with their contents, sorted by relative path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

pub fn read_csv_column(path: &Path, column: &str) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == column).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

pub fn report_value(path: &Path, key: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .find_map(|l| {
            l.split_once(" = ")
                .filter(|(k, _)| *k == key)
                .map(|(_, v)| v.to_string())
        })
        .unwrap_or_else(|| panic!("{key} missing from {}", path.display()))
}
