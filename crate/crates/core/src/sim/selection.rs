//! Replicated K-selection: naive, single-fold and multifold curves.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{gen_binomial_pca_data, gen_gamma_clusters, BinomialPcaConfig, GammaTask};
use super::report::{MethodSummary, SimReport};
use crate::error::{Error, Result};
use crate::eval::{cv_curves, CvMethod, LossCurve, LossKind, Task};
use crate::family::Family;
use crate::parallel;
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionTask {
    BinomialPca,
    GammaSmall,
    GammaLarge,
}

impl SelectionTask {
    pub fn true_k(&self) -> usize {
        match self {
            SelectionTask::BinomialPca => BinomialPcaConfig::default().rank(),
            SelectionTask::GammaSmall => GammaTask::Small.true_k(),
            SelectionTask::GammaLarge => GammaTask::Large.true_k(),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            SelectionTask::BinomialPca => Family::Binomial { trials: BinomialPcaConfig::default().trials },
            SelectionTask::GammaSmall => Family::Gamma { shape: GammaTask::Small.shape() },
            SelectionTask::GammaLarge => Family::Gamma { shape: GammaTask::Large.shape() },
        }
    }

    pub fn eval_task(&self) -> Task {
        match self {
            SelectionTask::BinomialPca => Task::Pca,
            _ => Task::Cluster,
        }
    }

    pub fn default_candidates(&self) -> Vec<usize> {
        match self {
            SelectionTask::BinomialPca => (1..=20).collect(),
            SelectionTask::GammaSmall => (1..=10).collect(),
            SelectionTask::GammaLarge => (1..=20).collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SelectionTask::BinomialPca => "pca",
            SelectionTask::GammaSmall => "gamma-small",
            SelectionTask::GammaLarge => "gamma-large",
        }
    }

    pub fn generate(&self, stream: &RandomStream) -> Result<DMatrix<f64>> {
        Ok(match self {
            SelectionTask::BinomialPca => gen_binomial_pca_data(&BinomialPcaConfig::default(), stream)?.x,
            SelectionTask::GammaSmall => gen_gamma_clusters(GammaTask::Small, stream).x,
            SelectionTask::GammaLarge => gen_gamma_clusters(GammaTask::Large, stream).x,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionSimConfig {
    pub task: SelectionTask,
    pub methods: Vec<CvMethod>,
    pub losses: Vec<LossKind>,
    pub candidates: Vec<usize>,
    pub n_reps: usize,
}

impl SelectionSimConfig {
    /// Naive, single-fold ε = 0.5 and 0.8, and 5-fold, with both losses.
    pub fn standard(task: SelectionTask, n_reps: usize) -> Self {
        SelectionSimConfig {
            task,
            methods: vec![
                CvMethod::Naive,
                CvMethod::Single { eps_train: 0.5 },
                CvMethod::Single { eps_train: 0.8 },
                CvMethod::Multifold { folds: 5 },
            ],
            losses: vec![LossKind::Nll, LossKind::Mse],
            candidates: task.default_candidates(),
            n_reps,
        }
    }
}

/// Replicate r generates data from `stream.substream(r).substream(0)` and
/// evaluates method q with `stream.substream(r).substream(q + 1)`.
pub fn run_selection_sim(cfg: &SelectionSimConfig, stream: &RandomStream) -> Result<SimReport> {
    if cfg.n_reps == 0 || cfg.methods.is_empty() || cfg.losses.is_empty() {
        return Err(Error::Usage("need replicates, methods and loss kinds".into()));
    }
    let family = cfg.task.family();
    let task = cfg.task.eval_task();
    // curves[r][q][l]
    let curves: Vec<Vec<Vec<LossCurve>>> = parallel::install(|| {
        (0..cfg.n_reps)
            .into_par_iter()
            .map(|r| {
                let rs = stream.substream(r as u64);
                let x = cfg.task.generate(&rs.substream(0))?;
                cfg.methods
                    .iter()
                    .enumerate()
                    .map(|(q, &m)| cv_curves(&x, &family, &cfg.candidates, m, &cfg.losses, task, &rs.substream(q as u64 + 1)))
                    .collect()
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let true_k = cfg.task.true_k();
    let nk = cfg.candidates.len();
    let mut methods = Vec::new();
    for (q, m) in cfg.methods.iter().enumerate() {
        for (l, &loss) in cfg.losses.iter().enumerate() {
            let reps: Vec<&LossCurve> = curves.iter().map(|c| &c[q][l]).collect();
            let mut hist = vec![0usize; nk];
            let mut mean = vec![0.0; nk];
            for c in &reps {
                hist[cfg.candidates.iter().position(|&k| k == c.selected_k).expect("selected from candidates")] += 1;
                for (acc, v) in mean.iter_mut().zip(&c.mean_loss) {
                    *acc += v / reps.len() as f64;
                }
            }
            let averaged = LossCurve::new(cfg.candidates.clone(), DMatrix::from_row_slice(1, nk, &mean))?;
            let mut s = MethodSummary::named(m.label());
            s.eps = match m {
                CvMethod::Single { eps_train } => Some(*eps_train),
                CvMethod::Multifold { folds } => Some((*folds as f64 - 1.0) / *folds as f64),
                CvMethod::Naive => None,
            };
            s.loss = Some(loss);
            s.proportion_correct = Some(reps.iter().filter(|c| c.selected_k == true_k).count() as f64 / reps.len() as f64);
            s.monotone_fraction = Some(reps.iter().filter(|c| c.is_non_increasing(1e-9)).count() as f64 / reps.len() as f64);
            s.candidates = Some(cfg.candidates.clone());
            s.histogram = Some(hist);
            s.mean_rescaled_curve = Some(averaged.rescale().mean_loss);
            s.mean_curve = Some(mean);
            methods.push(s);
        }
    }
    Ok(SimReport {
        experiment: cfg.task.name().into(),
        seed: stream.master_seed(),
        n_reps: cfg.n_reps,
        config: serde_json::to_value(cfg)?,
        methods,
    })
}
