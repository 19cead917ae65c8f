use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Negative log-likelihood summed over all test cells.
    Nll,
    /// Mean squared error against the test-scale fitted mean.
    Mse,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Nll => "nll",
            LossKind::Mse => "mse",
        }
    }
}

/// Loss as a function of the candidate K, one row per fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub candidate_ks: Vec<usize>,
    /// M × |K|; a single row for naive and single-fold evaluation.
    pub per_fold_loss: DMatrix<f64>,
    pub mean_loss: Vec<f64>,
    pub selected_k: usize,
    /// Whether `mean_loss` has been min-max rescaled to [0, 1].
    pub rescaled: bool,
}

impl LossCurve {
    pub fn new(candidate_ks: Vec<usize>, per_fold_loss: DMatrix<f64>) -> Result<Self> {
        if candidate_ks.is_empty() || per_fold_loss.ncols() != candidate_ks.len() || per_fold_loss.nrows() == 0 {
            return Err(Error::Usage("loss matrix does not match the candidate list".into()));
        }
        let mean_loss: Vec<f64> = per_fold_loss.column_iter().map(|c| c.mean()).collect();
        let selected_k = candidate_ks[argmin(&mean_loss)];
        Ok(LossCurve { candidate_ks, per_fold_loss, mean_loss, selected_k, rescaled: false })
    }

    /// Copy with `mean_loss` mapped onto [0, 1]; a flat curve maps to all zeros.
    pub fn rescale(&self) -> LossCurve {
        let mut out = self.clone();
        out.mean_loss = min_max(&self.mean_loss);
        out.rescaled = true;
        out
    }

    /// True when the mean loss never increases by more than `slack` from one
    /// candidate to the next.
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.mean_loss.windows(2).all(|w| w[1] <= w[0] + slack * w[0].abs().max(1.0))
    }

    pub fn folds(&self) -> usize {
        self.per_fold_loss.nrows()
    }
}

/// Index of the smallest value, first one on ties. NaN never wins.
pub(crate) fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] || xs[best].is_nan() {
            best = i;
        }
    }
    best
}

pub(crate) fn min_max(xs: &[f64]) -> Vec<f64> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        xs.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; xs.len()]
    }
}
