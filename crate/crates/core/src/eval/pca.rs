//! Rank-K binomial PCA on the logit scale.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use super::curve::LossKind;
use crate::error::{Error, Result};
use crate::special::{expit, ln_choose, logit, softplus};

/// Added to counts (and twice to trials) before taking the logit.
pub const PSEUDO_COUNT: f64 = 0.001;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaFit {
    /// n × K
    pub u: DMatrix<f64>,
    /// Leading K singular values, non-increasing.
    pub d: DVector<f64>,
    /// d × K
    pub v: DMatrix<f64>,
    pub rank: usize,
    /// U_K D_K V_Kᵀ
    pub logits: DMatrix<f64>,
    /// expit(logits)
    pub probs: DMatrix<f64>,
}

/// Full SVD of a training matrix's pseudo-count logits, from which fits of
/// every rank can be read off.
#[derive(Clone, Debug)]
pub struct BinomialSvd {
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    trials: u64,
}

impl BinomialSvd {
    pub fn new(x_train: &DMatrix<f64>, trials_train: u64) -> Result<Self> {
        check_counts(x_train, trials_train, "training")?;
        if x_train.is_empty() {
            return Err(Error::Usage("empty training matrix".into()));
        }
        let r = trials_train as f64;
        let lo = x_train.map(|x| logit((x + PSEUDO_COUNT) / (r + 2.0 * PSEUDO_COUNT)));
        Ok(BinomialSvd { svd: SVD::new(lo, true, true), trials: trials_train })
    }

    pub fn max_rank(&self) -> usize {
        self.svd.singular_values.len()
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.svd.singular_values
    }

    pub fn fit(&self, k: usize) -> Result<PcaFit> {
        self.check_rank(k)?;
        let u = self.svd.u.as_ref().expect("u computed").columns(0, k).into_owned();
        let v = self.svd.v_t.as_ref().expect("v computed").rows(0, k).transpose();
        let d = self.svd.singular_values.rows(0, k).into_owned();
        let logits = &u * DMatrix::from_diagonal(&d) * v.transpose();
        let probs = logits.map(expit);
        Ok(PcaFit { u, d, v, rank: k, logits, probs })
    }

    /// Test loss at each rank in `ks`, reusing one reconstruction that is
    /// grown one component at a time.
    pub fn losses(&self, x_test: &DMatrix<f64>, trials_test: u64, ks: &[usize], kind: LossKind) -> Result<Vec<f64>> {
        for &k in ks {
            self.check_rank(k)?;
        }
        let u = self.svd.u.as_ref().expect("u computed");
        let vt = self.svd.v_t.as_ref().expect("v computed");
        if x_test.shape() != (u.nrows(), vt.ncols()) {
            return Err(Error::Usage(format!(
                "test matrix is {:?}, training matrix was {:?}",
                x_test.shape(),
                (u.nrows(), vt.ncols())
            )));
        }
        check_counts(x_test, trials_test, "test")?;
        let scorer = CellScorer::new(x_test, trials_test, kind);
        let mut logits = DMatrix::zeros(u.nrows(), vt.ncols());
        let mut built = 0;
        let mut order: Vec<usize> = (0..ks.len()).collect();
        order.sort_by_key(|&i| ks[i]);
        let mut out = vec![0.0; ks.len()];
        for i in order {
            while built < ks[i] {
                let s = self.svd.singular_values[built];
                logits.ger(s, &u.column(built), &vt.row(built).transpose(), 1.0);
                built += 1;
            }
            out[i] = scorer.score(&logits);
        }
        Ok(out)
    }

    fn check_rank(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.max_rank() {
            return Err(Error::Usage(format!("rank {k} outside 1..={}", self.max_rank())));
        }
        Ok(())
    }
}

/// SVD of logit((X + 0.001)/(r + 0.002)), truncated to rank K.
pub fn fit_binomial_pca(x_train: &DMatrix<f64>, trials_train: u64, k: usize) -> Result<PcaFit> {
    BinomialSvd::new(x_train, trials_train)?.fit(k)
}

/// NLL: −Σ log Binomial(x | trials_test, p); MSE: mean of (x − trials_test·p)².
pub fn loss_binomial(x_test: &DMatrix<f64>, trials_test: u64, fit: &PcaFit, kind: LossKind) -> Result<f64> {
    if x_test.shape() != fit.logits.shape() {
        return Err(Error::Usage(format!(
            "test matrix is {:?}, fit is {:?}",
            x_test.shape(),
            fit.logits.shape()
        )));
    }
    check_counts(x_test, trials_test, "test")?;
    Ok(CellScorer::new(x_test, trials_test, kind).score(&fit.logits))
}

struct CellScorer<'a> {
    x: &'a DMatrix<f64>,
    trials: f64,
    ln_choose: Option<DMatrix<f64>>,
}

impl<'a> CellScorer<'a> {
    fn new(x: &'a DMatrix<f64>, trials: u64, kind: LossKind) -> Self {
        let r = trials as f64;
        let ln_choose = (kind == LossKind::Nll).then(|| x.map(|v| ln_choose(r, v)));
        CellScorer { x, trials: r, ln_choose }
    }

    fn score(&self, logits: &DMatrix<f64>) -> f64 {
        let r = self.trials;
        match &self.ln_choose {
            Some(lc) => {
                let mut nll = 0.0;
                for ((&x, &eta), &c) in self.x.iter().zip(logits.iter()).zip(lc.iter()) {
                    // log p = −softplus(−η), log(1 − p) = −softplus(η)
                    nll -= c - x * softplus(-eta) - (r - x) * softplus(eta);
                }
                nll
            }
            None => {
                let ss: f64 = self.x.iter().zip(logits.iter()).map(|(&x, &eta)| (x - r * expit(eta)).powi(2)).sum();
                ss / self.x.len() as f64
            }
        }
    }
}

fn check_counts(x: &DMatrix<f64>, trials: u64, what: &str) -> Result<()> {
    let r = trials as f64;
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            let v = x[(i, j)];
            if !(v >= 0.0 && v <= r && v.fract() == 0.0) {
                return Err(Error::Domain(format!(
                    "{what} entry ({}, {}) = {v} is not a count in [0, {trials}]",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}
