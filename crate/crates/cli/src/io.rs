//! CSV and JSON reading and writing.
//!
//! Every CSV uses a comma separator, LF line endings and floats with 17
//! significant digits.

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use scc_core::ColMatrix;
use serde::Serialize;

/// Malformed or inconsistent user input (exit code 2).
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(file))
}

fn line_of(rec: &csv::StringRecord, fallback: usize) -> u64 {
    rec.position().map_or(fallback as u64, |p| p.line())
}

/// Numeric matrix with an optional header row (detected when no field of
/// the first row parses as a number).
pub fn read_matrix(path: &Path) -> Result<ColMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        let line = line_of(&rec, k + 1);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if k == 0 && rec.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let mut row = Vec::with_capacity(rec.len());
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                input_error(format!("{}: line {line}, column {}: '{field}' is not a number", path.display(), c + 1))
            })?;
            if !v.is_finite() {
                return Err(input_error(format!("{}: line {line}, column {}: non-finite value", path.display(), c + 1)));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(input_error(format!(
                    "{}: line {line}: expected {} fields, found {}",
                    path.display(),
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(input_error(format!("{}: no data rows", path.display())));
    }
    Ok(ColMatrix::from_rows(&rows)?)
}

/// One non-negative integer per line.
pub fn read_integers(path: &Path) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (k, rec) in reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        let line = line_of(&rec, k + 1);
        let field = rec.get(0).unwrap_or("");
        if field.is_empty() && rec.len() <= 1 {
            continue;
        }
        if rec.len() != 1 {
            return Err(input_error(format!("{}: line {line}: expected one value per line", path.display())));
        }
        out.push(
            field
                .parse()
                .map_err(|_| input_error(format!("{}: line {line}: '{field}' is not a non-negative integer", path.display())))?,
        );
    }
    Ok(out)
}

/// 1-based feature indices, converted to 0-based.
pub fn read_features(path: &Path) -> Result<Vec<usize>> {
    read_integers(path)?
        .into_iter()
        .map(|f| f.checked_sub(1).ok_or_else(|| input_error(format!("{}: feature indices start at 1", path.display()))))
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_matrix(path: &Path, m: &ColMatrix<f64>) -> Result<()> {
    let (n, p) = m.shape();
    let mut s = (1..=p).map(|j| format!("f{j}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for i in 0..n {
        s.push_str(&(0..p).map(|j| float(m.get(i, j))).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn write_integers(path: &Path, v: &[usize]) -> Result<()> {
    write_text(path, &v.iter().map(|x| format!("{x}\n")).collect::<String>())
}

/// Writes a header and rows of preformatted fields.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}
