//! Truncated-SVD error curves and the preprocessing that feeds them.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SseCurve {
    /// ‖Y − U_K D_K V_Kᵀ‖²_F for K = 1..=K_max, computed directly.
    pub sse: Vec<f64>,
    /// ‖Y‖²_F − Σ_{j≤K} D²_jj for the same K.
    pub identity: Vec<f64>,
    pub singular_values: Vec<f64>,
}

/// Error of the rank-K truncated SVD of `y` for every K up to `k_max`.
pub fn sse_curve(y: &DMatrix<f64>, k_max: usize) -> Result<SseCurve> {
    let (u, d, vt) = truncated(y, k_max)?;
    let total = y.norm_squared();
    let mut approx = DMatrix::zeros(y.nrows(), y.ncols());
    let mut sse = Vec::with_capacity(k_max);
    let mut identity = Vec::with_capacity(k_max);
    let mut captured = 0.0;
    for k in 0..k_max {
        approx.ger(d[k], &u.column(k), &vt.row(k).transpose(), 1.0);
        sse.push((y - &approx).norm_squared());
        captured += d[k] * d[k];
        identity.push(total - captured);
    }
    Ok(SseCurve { sse, identity, singular_values: d[..k_max].to_vec() })
}

/// ‖Y_test − rank-K SVD of Y_train‖²_F for K = 1..=K_max.
pub fn sse_test_curve(y_train: &DMatrix<f64>, y_test: &DMatrix<f64>, k_max: usize) -> Result<Vec<f64>> {
    if y_train.shape() != y_test.shape() {
        return Err(Error::Usage(format!(
            "training matrix is {:?}, test matrix is {:?}",
            y_train.shape(),
            y_test.shape()
        )));
    }
    let (u, d, vt) = truncated(y_train, k_max)?;
    let mut approx = DMatrix::zeros(y_train.nrows(), y_train.ncols());
    Ok((0..k_max)
        .map(|k| {
            approx.ger(d[k], &u.column(k), &vt.row(k).transpose(), 1.0);
            (y_test - &approx).norm_squared()
        })
        .collect())
}

fn truncated(y: &DMatrix<f64>, k_max: usize) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let max = y.nrows().min(y.ncols());
    if k_max == 0 || k_max > max {
        return Err(Error::Usage(format!("K_max = {k_max} outside 1..={max}")));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("matrix contains {v}")));
    }
    let svd = SVD::new(y.clone(), true, true);
    Ok((
        svd.u.expect("u computed"),
        svd.singular_values.iter().copied().collect(),
        svd.v_t.expect("v computed"),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardized {
    pub matrix: DMatrix<f64>,
    /// Columns with zero sample variance, set to 0.
    pub constant_columns: Vec<usize>,
}

/// Center each column and scale it to unit sample standard deviation.
pub fn standardize_columns(y: &DMatrix<f64>) -> Result<Standardized> {
    let n = y.nrows();
    if n < 2 {
        return Err(Error::Usage(format!("standardizing needs at least 2 rows, got {n}")));
    }
    let mut out = y.clone();
    let mut constant_columns = Vec::new();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        // second pass removes the rounding left by the first
        for _ in 0..2 {
            let m = col.mean();
            col.add_scalar_mut(-m);
        }
        let sd = (col.norm_squared() / (n - 1) as f64).sqrt();
        if sd == 0.0 || !sd.is_finite() || sd <= 1e-14 * y.column(j).amax() {
            col.fill(0.0);
            constant_columns.push(j);
        } else {
            col /= sd;
        }
    }
    Ok(Standardized { matrix: out, constant_columns })
}

/// log(1 + scale · x_ij / Σ_t x_it); all-zero rows stay zero.
pub fn log_normalize(counts: &DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain(format!("scale must be positive, got {scale}")));
    }
    if let Some(v) = counts.iter().find(|&&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!("counts must be non-negative, got {v}")));
    }
    let mut out = counts.clone();
    for mut row in out.row_iter_mut() {
        let total: f64 = row.sum();
        if total > 0.0 {
            row.apply(|v| *v = (scale * *v / total).ln_1p());
        }
    }
    Ok(out)
}
