//! Dense CSV matrices and report files.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thinlab::eval::LossCurve;
use thinlab::{Error, Result};

/// What the cells of a matrix file must hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueKind {
    Real,
    /// Non-negative integers.
    Count,
}

/// Parse a dense CSV matrix. A first line whose cells are all non-numeric is
/// taken as a header. Rows and columns in errors are counted from 1 and
/// refer to lines of the file, header included.
pub fn parse_matrix(text: &str, kind: ValueKind) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (line, rec) in reader.records().enumerate() {
        let row = line + 1;
        let rec = rec.map_err(|e| Error::Parse { row, col: 0, msg: e.to_string() })?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        if line == 0 && rec.iter().all(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Parse { row, col: rec.len().min(w) + 1, msg: format!("expected {w} columns, found {}", rec.len()) });
        }
        let mut vals = Vec::with_capacity(w);
        for (j, cell) in rec.iter().enumerate() {
            let col = j + 1;
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Parse { row, col, msg: format!("`{cell}` is not a number") })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, col, msg: format!("`{cell}` is not finite") });
            }
            if kind == ValueKind::Count {
                if v.fract() != 0.0 {
                    return Err(Error::Parse { row, col, msg: format!("{cell} is not an integer count") });
                }
                if v < 0.0 {
                    return Err(Error::Parse { row, col, msg: format!("{cell} is a negative count") });
                }
            }
            vals.push(v);
        }
        rows.push(vals);
    }
    let Some(w) = width else {
        return Err(Error::Parse { row: 1, col: 0, msg: "no data rows".into() });
    };
    Ok(DMatrix::from_fn(rows.len(), w, |i, j| rows[i][j]))
}

pub fn read_matrix(path: &Path, kind: ValueKind) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text, kind)
}

/// Up to 17 significant digits, shortest of plain or exponent form; whole
/// numbers below 1e15 are written as integers.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.fract() == 0.0 && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    let sci = format!("{v:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let s = format!("{v:.*}", (16 - exp) as usize);
        trim_zeros(&s).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mant))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn matrix_csv(x: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in x.row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, x: &DMatrix<f64>) -> Result<()> {
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("matrix entry {v}")));
    }
    write_text(path, &matrix_csv(x))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Serialize to pretty JSON, refusing non-finite numbers (which JSON would
/// silently turn into null).
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    check_finite(&v, "")?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn check_finite(v: &serde_json::Value, at: &str) -> Result<()> {
    match v {
        // serde_json maps NaN and ±inf to null
        serde_json::Value::Null => Err(Error::NonFinite(if at.is_empty() { "<root>".into() } else { at.into() })),
        serde_json::Value::Array(xs) => {
            xs.iter().enumerate().try_for_each(|(i, x)| check_finite(x, &format!("{at}[{i}]")))
        }
        serde_json::Value::Object(m) => m.iter().try_for_each(|(k, x)| {
            check_finite(x, &if at.is_empty() { k.clone() } else { format!("{at}.{k}") })
        }),
        _ => Ok(()),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Columns `K, loss_fold_1..M, mean_loss`, one row per candidate.
pub fn loss_curve_csv(curve: &LossCurve) -> Result<String> {
    let m = curve.folds();
    let mut out = String::from("K");
    for f in 1..=m {
        out.push_str(&format!(",loss_fold_{f}"));
    }
    out.push_str(",mean_loss\n");
    for (c, &k) in curve.candidate_ks.iter().enumerate() {
        let mut cells = vec![k.to_string()];
        for f in 0..m {
            cells.push(finite(curve.per_fold_loss[(f, c)], "loss_fold")?);
        }
        cells.push(finite(curve.mean_loss[c], "mean_loss")?);
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Rebuild a curve from [`loss_curve_csv`] output.
pub fn parse_loss_curve_csv(text: &str) -> Result<LossCurve> {
    let x = parse_matrix(text, ValueKind::Real)?;
    if x.ncols() < 3 {
        return Err(Error::Parse { row: 1, col: x.ncols(), msg: "need K, at least one fold and mean_loss".into() });
    }
    let ks: Vec<usize> = x.column(0).iter().map(|&k| k as usize).collect();
    let per_fold = x.columns(1, x.ncols() - 2).transpose();
    LossCurve::new(ks, per_fold)
}

pub(crate) fn finite(v: f64, field: &str) -> Result<String> {
    if v.is_finite() {
        Ok(format_float(v))
    } else {
        Err(Error::NonFinite(field.into()))
    }
}

/// Lower-case hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}
