//! Naive, single-fold and multifold selection of K.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curve::{LossCurve, LossKind};
use super::gamma::{fit_gamma_clusters, loss_gamma};
use super::pca::BinomialSvd;
use crate::error::{Error, Result};
use crate::family::{Family, ThinPlan};
use crate::parallel;
use crate::rng::RandomStream;
use crate::thinning::{fold_complement, thin_dataset, ThinMode};

pub const KMEANS_RESTARTS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Rank of a binomial logit-PCA fit; needs a binomial family.
    Pca,
    /// Number of k-means clusters with gamma fits; needs a gamma family.
    Cluster,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CvMethod {
    /// Fit and score on the full data.
    Naive,
    /// Thin once into (ε_train, 1 − ε_train).
    Single { eps_train: f64 },
    /// Thin into M equal folds; fold m is scored by a fit on the rest.
    Multifold { folds: usize },
}

impl CvMethod {
    pub fn label(&self) -> String {
        match self {
            CvMethod::Naive => "naive".into(),
            CvMethod::Single { eps_train } => format!("single_{eps_train}"),
            CvMethod::Multifold { folds } => format!("multifold_{folds}"),
        }
    }
}

struct Split {
    train: DMatrix<f64>,
    test: DMatrix<f64>,
    eps_train: f64,
    eps_test: f64,
    trials_train: u64,
    trials_test: u64,
}

/// Loss curve over `candidates` for one loss kind.
pub fn cv_select_k(
    x: &DMatrix<f64>,
    family: &Family,
    candidates: &[usize],
    method: CvMethod,
    kind: LossKind,
    task: Task,
    stream: &RandomStream,
) -> Result<LossCurve> {
    Ok(cv_curves(x, family, candidates, method, &[kind], task, stream)?.remove(0))
}

/// One curve per loss kind, all from the same thinning and the same fits.
///
/// Thinning draws from `stream.substream(0)`; the k-means seeding for split
/// m and candidate K draws from `stream.substream(1).substream(m).substream(K)`.
pub fn cv_curves(
    x: &DMatrix<f64>,
    family: &Family,
    candidates: &[usize],
    method: CvMethod,
    kinds: &[LossKind],
    task: Task,
    stream: &RandomStream,
) -> Result<Vec<LossCurve>> {
    if kinds.is_empty() {
        return Err(Error::Usage("no loss kind requested".into()));
    }
    family.validate()?;
    let trials = match (task, family) {
        (Task::Pca, Family::Binomial { trials }) => *trials,
        (Task::Cluster, Family::Gamma { .. } | Family::Exponential) => 0,
        _ => {
            return Err(Error::Usage(format!(
                "the {task:?} task cannot be run on a {} family",
                family.name()
            )))
        }
    };
    let (n, d) = x.shape();
    let max_k = match task {
        Task::Pca => n.min(d),
        Task::Cluster => n,
    };
    if candidates.is_empty() {
        return Err(Error::Usage("empty candidate list".into()));
    }
    if candidates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("candidates must be strictly increasing".into()));
    }
    if let Some(&k) = candidates.iter().find(|&&k| k == 0 || k > max_k) {
        return Err(Error::Usage(format!("candidate K = {k} outside 1..={max_k} for a {n} × {d} matrix")));
    }

    let splits = make_splits(x, family, method, trials, stream)?;
    let fit_stream = stream.substream(1);
    let losses: Vec<Vec<f64>> = match task {
        Task::Pca => parallel::install(|| {
            splits
                .par_iter()
                .map(|sp| {
                    let svd = BinomialSvd::new(&sp.train, sp.trials_train)?;
                    let per_kind = kinds
                        .iter()
                        .map(|&kind| svd.losses(&sp.test, sp.trials_test, candidates, kind))
                        .collect::<Result<Vec<_>>>()?;
                    // flatten as [kind][k]
                    Ok(per_kind.concat())
                })
                .collect::<Result<Vec<_>>>()
        })?,
        Task::Cluster => {
            let jobs: Vec<(usize, usize)> =
                (0..splits.len()).flat_map(|m| (0..candidates.len()).map(move |c| (m, c))).collect();
            let cells: Vec<Vec<f64>> = parallel::install(|| {
                jobs.par_iter()
                    .map(|&(m, c)| {
                        let sp = &splits[m];
                        let k = candidates[c];
                        let s = fit_stream.substream(m as u64).substream(k as u64);
                        let fit = fit_gamma_clusters(&sp.train, k, KMEANS_RESTARTS, &s)?;
                        kinds
                            .iter()
                            .map(|&kind| loss_gamma(&sp.test, &fit, sp.eps_test, sp.eps_train, kind))
                            .collect()
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let nk = candidates.len();
            (0..splits.len())
                .map(|m| {
                    (0..kinds.len())
                        .flat_map(|q| (0..nk).map(move |c| (q, c)))
                        .map(|(q, c)| cells[m * nk + c][q])
                        .collect()
                })
                .collect()
        }
    };

    let nk = candidates.len();
    kinds
        .iter()
        .enumerate()
        .map(|(q, _)| {
            let per_fold = DMatrix::from_fn(splits.len(), nk, |m, c| losses[m][q * nk + c]);
            LossCurve::new(candidates.to_vec(), per_fold)
        })
        .collect()
}

fn make_splits(x: &DMatrix<f64>, family: &Family, method: CvMethod, trials: u64, stream: &RandomStream) -> Result<Vec<Split>> {
    let thin_stream = stream.substream(0);
    match method {
        CvMethod::Naive => Ok(vec![Split {
            train: x.clone(),
            test: x.clone(),
            eps_train: 1.0,
            eps_test: 1.0,
            trials_train: trials,
            trials_test: trials,
        }]),
        CvMethod::Single { eps_train } => {
            let plan = ThinPlan::two_fold(eps_train)?;
            let sizes = plan.integer_sizes(family)?.unwrap_or_default();
            let fs = thin_dataset(x, family, &plan, ThinMode::Elementwise, &thin_stream)?;
            let mut folds = fs.folds.into_iter();
            Ok(vec![Split {
                train: folds.next().expect("two folds"),
                test: folds.next().expect("two folds"),
                eps_train,
                eps_test: 1.0 - eps_train,
                trials_train: sizes.first().copied().unwrap_or(0),
                trials_test: sizes.get(1).copied().unwrap_or(0),
            }])
        }
        CvMethod::Multifold { folds } => {
            if folds < 2 {
                return Err(Error::Plan(format!("multifold evaluation needs M ≥ 2, got {folds}")));
            }
            let plan = ThinPlan::equal(folds)?;
            let sizes = plan.integer_sizes(family)?;
            let fs = thin_dataset(x, family, &plan, ThinMode::Elementwise, &thin_stream)?;
            let m_f = folds as f64;
            (1..=folds)
                .map(|m| {
                    let test_trials = sizes.as_ref().map_or(0, |s| s[m - 1]);
                    Ok(Split {
                        train: fold_complement(&fs, m)?,
                        test: fs.fold(m)?.clone(),
                        eps_train: (m_f - 1.0) / m_f,
                        eps_test: 1.0 / m_f,
                        trials_train: trials - test_trials,
                        trials_test: test_trials,
                    })
                })
                .collect()
        }
    }
}
