//! Text formats: csv and libsvm datasets, mask files and model files.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! written and read back is bit-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use safescreen_core::{Dataset, Matrix, Mode, ModelVector, ProblemKind, SampleMask};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("empty file")]
    Empty,
    #[error(transparent)]
    Core(#[from] safescreen_core::Error),
}

pub type Result<T> = std::result::Result<T, IoError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Libsvm,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "libsvm" => Ok(Format::Libsvm),
            other => Err(format!("unknown format {other:?} (expected csv or libsvm)")),
        }
    }
}

fn parse_err(row: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse {
        row,
        msg: msg.into(),
    }
}

fn parse_f64(tok: &str, row: usize) -> Result<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| parse_err(row, format!("not a number: {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(row, format!("non-finite value {tok:?}")));
    }
    Ok(v)
}

/// Classification labels are ±1; 0 is read as −1.
fn read_label(v: f64, kind: ProblemKind, row: usize) -> Result<f64> {
    if !kind.is_classification() {
        return Ok(v);
    }
    match v {
        1.0 => Ok(1.0),
        -1.0 | 0.0 => Ok(-1.0),
        v => Err(parse_err(row, format!("invalid label {v} for classification"))),
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// One sample per line, label in the last column.
pub fn parse_csv(text: &str, kind: ProblemKind, interval_halfwidth: Option<f64>) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (row, line) in lines(text) {
        let vals = line
            .split(',')
            .map(|t| parse_f64(t, row))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() < 2 {
            return Err(parse_err(row, "need at least one feature and a label"));
        }
        match width {
            None => width = Some(vals.len()),
            Some(w) if w != vals.len() => {
                return Err(parse_err(row, format!("expected {w} columns, found {}", vals.len())))
            }
            _ => {}
        }
        let (feat, label) = vals.split_at(vals.len() - 1);
        labels.push(read_label(label[0], kind, row)?);
        rows.push(feat.to_vec());
    }
    if rows.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(Dataset::new(Matrix::from_rows(&rows)?, labels, kind, interval_halfwidth)?)
}

/// `label idx:val …` with 1-based indices; absent entries are 0 and `p` is
/// the largest index seen.
pub fn parse_libsvm(
    text: &str,
    kind: ProblemKind,
    interval_halfwidth: Option<f64>,
) -> Result<Dataset> {
    let mut sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut p = 0;
    for (row, line) in lines(text) {
        let mut toks = line.split_whitespace();
        let label = parse_f64(toks.next().unwrap_or_default(), row)?;
        labels.push(read_label(label, kind, row)?);
        let mut entries = Vec::new();
        for tok in toks {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(row, format!("expected idx:val, found {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(row, format!("bad index {idx:?}")))?;
            if idx == 0 {
                return Err(parse_err(row, "indices are 1-based"));
            }
            if entries.iter().any(|&(j, _)| j == idx - 1) {
                return Err(parse_err(row, format!("duplicate index {idx}")));
            }
            entries.push((idx - 1, parse_f64(val, row)?));
            p = p.max(idx);
        }
        sparse.push(entries);
    }
    if sparse.is_empty() {
        return Err(IoError::Empty);
    }
    if p == 0 {
        return Err(parse_err(1, "no features in file"));
    }
    let mut features = Matrix::zeros(sparse.len(), p);
    for (i, entries) in sparse.iter().enumerate() {
        for &(j, v) in entries {
            features[(i, j)] = v;
        }
    }
    Ok(Dataset::new(features, labels, kind, interval_halfwidth)?)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_dataset(
    path: &Path,
    format: Format,
    kind: ProblemKind,
    interval_halfwidth: Option<f64>,
) -> Result<Dataset> {
    let text = read(path)?;
    match format {
        Format::Csv => parse_csv(&text, kind, interval_halfwidth),
        Format::Libsvm => parse_libsvm(&text, kind, interval_halfwidth),
    }
}

pub fn format_csv(data: &Dataset) -> String {
    let mut out = String::new();
    for (row, b) in data.features().row_iter().zip(data.labels()) {
        for v in row {
            write!(out, "{v:?},").unwrap();
        }
        writeln!(out, "{b:?}").unwrap();
    }
    out
}

pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    write(path, &format_csv(data))
}

/// One line per sample: `<0|1> <score>`.
pub fn format_mask(mask: &SampleMask) -> String {
    let mut out = String::new();
    for (k, s) in mask.keep.iter().zip(&mask.scores) {
        writeln!(out, "{} {s:?}", u8::from(*k)).unwrap();
    }
    out
}

pub fn parse_mask(text: &str) -> Result<SampleMask> {
    let mut keep = Vec::new();
    let mut scores = Vec::new();
    for (row, line) in lines(text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [flag, score] = toks[..] else {
            return Err(parse_err(row, format!("expected 2 tokens, found {}", toks.len())));
        };
        keep.push(match flag {
            "1" => true,
            "0" => false,
            other => return Err(parse_err(row, format!("keep flag must be 0 or 1, found {other:?}"))),
        });
        // scores may legitimately be infinite (unbounded region)
        scores.push(
            score
                .parse::<f64>()
                .map_err(|_| parse_err(row, format!("not a number: {score:?}")))?,
        );
    }
    Ok(SampleMask { keep, scores })
}

pub fn save_mask(mask: &SampleMask, path: &Path) -> Result<()> {
    write(path, &format_mask(mask))
}

pub fn load_mask(path: &Path) -> Result<SampleMask> {
    parse_mask(&read(path)?)
}

/// First line `linear` or `kernelized`, then one coefficient per line.
pub fn format_model(model: &ModelVector) -> String {
    let mut out = String::from(match model.mode {
        Mode::Linear => "linear\n",
        Mode::Kernelized => "kernelized\n",
    });
    for v in &model.coefficients {
        writeln!(out, "{v:?}").unwrap();
    }
    out
}

pub fn parse_model(text: &str) -> Result<ModelVector> {
    let mut it = lines(text);
    let mode = match it.next() {
        Some((_, "linear")) => Mode::Linear,
        Some((_, "kernelized")) => Mode::Kernelized,
        Some((row, other)) => return Err(parse_err(row, format!("unknown model mode {other:?}"))),
        None => return Err(IoError::Empty),
    };
    let coefficients = it.map(|(row, l)| parse_f64(l, row)).collect::<Result<_>>()?;
    Ok(ModelVector::new(coefficients, mode)?)
}

pub fn save_model(model: &ModelVector, path: &Path) -> Result<()> {
    write(path, &format_model(model))
}

pub fn load_model(path: &Path) -> Result<ModelVector> {
    parse_model(&read(path)?)
}

pub fn save_text(path: &Path, contents: &str) -> Result<()> {
    write(path, contents)
}

pub fn load_text(path: &Path) -> Result<String> {
    read(path)
}
