//! Per-cluster gamma fits and their test-fold losses.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::curve::LossKind;
use super::kmeans::kmeans;
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::special::{digamma, ln_gamma, trigamma};

/// Shape estimates are clipped here; zero-variance samples hit it.
pub const SHAPE_CAP: f64 = 1e6;
const NEWTON_STEPS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaMle {
    pub shape: f64,
    /// shape / sample mean
    pub rate: f64,
    /// Shape was clipped to `SHAPE_CAP`.
    pub capped: bool,
}

/// Maximum-likelihood shape and rate from positive observations.
///
/// Starts from the closed-form approximation in s = ln(mean) − mean(ln x)
/// and refines with Newton steps on ln a − ψ(a) = s.
pub fn gamma_mle(xs: &[f64]) -> Result<GammaMle> {
    if xs.is_empty() {
        return Err(Error::Usage("gamma fit needs at least one observation".into()));
    }
    if let Some(v) = xs.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!("gamma fit needs positive finite data, got {v}")));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let mean_ln = xs.iter().map(|v| v.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_ln;
    let capped = |mean: f64| GammaMle { shape: SHAPE_CAP, rate: SHAPE_CAP / mean, capped: true };
    // s ≥ 0 by Jensen; anything this small means a (near-)constant sample
    if !(s > 1e-14) {
        return Ok(capped(mean));
    }
    let mut a = (3.0 - s + ((s - 3.0) * (s - 3.0) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..NEWTON_STEPS {
        if a > SHAPE_CAP {
            break;
        }
        let f = a.ln() - digamma(a) - s;
        let df = 1.0 / a - trigamma(a);
        let mut next = a - f / df;
        if !(next > 0.0) {
            next = a / 2.0;
        }
        let done = (next - a).abs() <= 1e-13 * a;
        a = next;
        if done {
            break;
        }
    }
    if !(a <= SHAPE_CAP) {
        return Ok(capped(mean));
    }
    Ok(GammaMle { shape: a, rate: a / mean, capped: false })
}

/// Cluster labels plus K × d shape and rate estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterFit {
    /// Label of each training row, counted from 0.
    pub assignments: Vec<usize>,
    pub k: usize,
    pub shape: DMatrix<f64>,
    pub rate: DMatrix<f64>,
    /// Clusters with no rows; their parameters are the pooled estimates.
    pub empty: Vec<bool>,
    /// (cluster, column) cells whose shape was clipped.
    pub capped: Vec<(usize, usize)>,
}

impl ClusterFit {
    /// Fitted mean shape / rate in each cell.
    pub fn means(&self) -> DMatrix<f64> {
        self.shape.component_div(&self.rate)
    }

    pub fn is_flagged(&self) -> bool {
        self.empty.iter().any(|&e| e) || !self.capped.is_empty()
    }
}

/// k-means on the training fold, then per-cluster, per-column gamma MLEs.
pub fn fit_gamma_clusters(x_train: &DMatrix<f64>, k: usize, restarts: usize, stream: &RandomStream) -> Result<ClusterFit> {
    check_positive(x_train, "training")?;
    let km = kmeans(x_train, k, restarts, stream)?;
    fit_gamma_clusters_with(x_train, &km.assignments, k)
}

/// Gamma MLEs for given labels in `0..k`.
pub fn fit_gamma_clusters_with(x_train: &DMatrix<f64>, assignments: &[usize], k: usize) -> Result<ClusterFit> {
    let (n, d) = x_train.shape();
    if assignments.len() != n {
        return Err(Error::Usage(format!("{} labels for {n} rows", assignments.len())));
    }
    if let Some(&a) = assignments.iter().find(|&&a| a >= k) {
        return Err(Error::Usage(format!("label {a} outside 0..{k}")));
    }
    check_positive(x_train, "training")?;
    let mut members = vec![Vec::new(); k];
    for (i, &a) in assignments.iter().enumerate() {
        members[a].push(i);
    }
    let empty: Vec<bool> = members.iter().map(|m| m.is_empty()).collect();
    let mut shape = DMatrix::zeros(k, d);
    let mut rate = DMatrix::zeros(k, d);
    let mut capped = Vec::new();
    let mut buf = Vec::with_capacity(n);
    for j in 0..d {
        let col = x_train.column(j);
        let pooled = empty.iter().any(|&e| e).then(|| gamma_mle(col.as_slice())).transpose()?;
        for c in 0..k {
            let fit = if empty[c] {
                pooled.expect("computed when a cluster is empty")
            } else {
                buf.clear();
                buf.extend(members[c].iter().map(|&i| col[i]));
                gamma_mle(&buf)?
            };
            if fit.capped {
                capped.push((c, j));
            }
            shape[(c, j)] = fit.shape;
            rate[(c, j)] = fit.rate;
        }
    }
    Ok(ClusterFit { assignments: assignments.to_vec(), k, shape, rate, empty, capped })
}

/// NLL with shape λ̂·ε_test/ε_train and rate θ̂, or MSE against
/// (ε_test/ε_train)·μ̂, cell by cell through the training labels.
pub fn loss_gamma(x_test: &DMatrix<f64>, fit: &ClusterFit, eps_test: f64, eps_train: f64, kind: LossKind) -> Result<f64> {
    let (n, d) = x_test.shape();
    if n != fit.assignments.len() || d != fit.shape.ncols() {
        return Err(Error::Usage(format!(
            "test matrix is {n} × {d}, fit covers {} × {}",
            fit.assignments.len(),
            fit.shape.ncols()
        )));
    }
    if !(eps_test > 0.0 && eps_train > 0.0 && eps_test.is_finite() && eps_train.is_finite()) {
        return Err(Error::Domain(format!("fold weights must be positive, got {eps_test} and {eps_train}")));
    }
    check_positive(x_test, "test")?;
    let ratio = eps_test / eps_train;
    let mut total = 0.0;
    match kind {
        LossKind::Nll => {
            // per-cell constant a·ln θ − ln Γ(a)
            let a = &fit.shape * ratio;
            let konst = DMatrix::from_fn(fit.k, d, |c, j| a[(c, j)] * fit.rate[(c, j)].ln() - ln_gamma(a[(c, j)]));
            for j in 0..d {
                for (i, &c) in fit.assignments.iter().enumerate() {
                    let x = x_test[(i, j)];
                    total -= konst[(c, j)] + (a[(c, j)] - 1.0) * x.ln() - fit.rate[(c, j)] * x;
                }
            }
            Ok(total)
        }
        LossKind::Mse => {
            let mu = fit.means() * ratio;
            for j in 0..d {
                for (i, &c) in fit.assignments.iter().enumerate() {
                    total += (x_test[(i, j)] - mu[(c, j)]).powi(2);
                }
            }
            Ok(total / (n * d) as f64)
        }
    }
}

fn check_positive(x: &DMatrix<f64>, what: &str) -> Result<()> {
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            let v = x[(i, j)];
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "{what} entry ({}, {}) = {v} is not positive",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}
