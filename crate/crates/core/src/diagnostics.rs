//! Consequences of thinning with a wrong nuisance parameter, and how fold
//! weights split Fisher information.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{Family, ThinPlan};
use crate::parallel;
use crate::rng::RandomStream;
use crate::samplers::{draw, standard_gamma, standard_normal, PrimitiveDist};
use crate::stats::{mean_var, pearson};
use crate::thinning::Thinner;

/// Replicates per substream in the Monte Carlo estimators.
const CHUNK: usize = 4096;

/// Data-generating law whose nuisance parameter may be misspecified when thinning.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum TrueLaw {
    Gaussian { mean: f64, var: f64 },
    /// Mean `size (1 - prob) / prob`.
    NegativeBinomial { size: f64, prob: f64 },
    /// Mean `shape / rate`.
    Gamma { shape: f64, rate: f64 },
}

impl TrueLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            TrueLaw::Gaussian { mean, .. } => mean,
            TrueLaw::NegativeBinomial { size, prob } => size * (1.0 - prob) / prob,
            TrueLaw::Gamma { shape, rate } => shape / rate,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            TrueLaw::Gaussian { var, .. } => var,
            TrueLaw::NegativeBinomial { size, prob } => size * (1.0 - prob) / (prob * prob),
            TrueLaw::Gamma { shape, rate } => shape / (rate * rate),
        }
    }

    /// The nuisance value that makes thinning exact.
    pub fn true_nuisance(&self) -> f64 {
        match *self {
            TrueLaw::Gaussian { var, .. } => var,
            TrueLaw::NegativeBinomial { size, .. } => size,
            TrueLaw::Gamma { shape, .. } => shape,
        }
    }

    /// The family used for thinning when `assumed` stands in for the nuisance.
    pub fn thinning_family(&self, assumed: f64) -> Family {
        match self {
            TrueLaw::Gaussian { .. } => Family::Gaussian { var: assumed },
            TrueLaw::NegativeBinomial { .. } => Family::NegativeBinomial { size: assumed },
            TrueLaw::Gamma { .. } => Family::Gamma { shape: assumed },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TrueLaw::Gaussian { mean, var } => mean.is_finite() && var > 0.0,
            TrueLaw::NegativeBinomial { size, prob } => size > 0.0 && prob > 0.0 && prob < 1.0,
            TrueLaw::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid true law {self:?}")))
        }
    }

    fn sample(&self, stream: &mut RandomStream) -> f64 {
        match *self {
            TrueLaw::Gaussian { mean, var } => mean + var.sqrt() * standard_normal(stream),
            TrueLaw::NegativeBinomial { size, prob } => {
                draw(&PrimitiveDist::NegativeBinomial { size, prob }, stream).expect("validated law")
            }
            TrueLaw::Gamma { shape, rate } => standard_gamma(shape, stream) / rate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MismatchSpec {
    pub law: TrueLaw,
    /// Assumed σ², r, or α used in place of the true nuisance.
    pub assumed: f64,
    pub epsilon: f64,
}

impl MismatchSpec {
    pub fn new(law: TrueLaw, assumed: f64, epsilon: f64) -> Result<Self> {
        law.validate()?;
        if !(assumed > 0.0 && assumed.is_finite()) {
            return Err(Error::Domain(format!("assumed nuisance must be positive, got {assumed}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(MismatchSpec { law, assumed, epsilon })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMoments {
    pub var1: f64,
    pub var2: f64,
    pub cov: f64,
    pub corr: f64,
}

/// Analytic variances, covariance and correlation of the two folds.
pub fn mismatch_moments(spec: &MismatchSpec) -> FoldMoments {
    let e = spec.epsilon;
    let a = spec.assumed;
    let mean = spec.law.mean();
    let var = spec.law.variance();
    // Var(X¹) = E[Var(X¹|X)] + Var(E[X¹|X]) with E[X¹|X] = εX
    let fold_var = |w: f64| match spec.law {
        TrueLaw::Gaussian { .. } => w * w * var + w * (1.0 - w) * a,
        TrueLaw::NegativeBinomial { .. } => {
            w * (1.0 - w) / (a + 1.0) * (a * mean + var + mean * mean) + w * w * var
        }
        TrueLaw::Gamma { .. } => w * (1.0 - w) / (a + 1.0) * (var + mean * mean) + w * w * var,
    };
    let cov = match spec.law {
        TrueLaw::Gaussian { var, .. } => e * (1.0 - e) * (var - a),
        TrueLaw::NegativeBinomial { size, prob } => {
            let odds = (1.0 - prob) / prob;
            e * (1.0 - e) * size * odds * odds * (1.0 - (size + 1.0) / (a + 1.0))
        }
        TrueLaw::Gamma { shape, rate } => {
            e * (1.0 - e) * shape / (rate * rate) * (1.0 - (shape + 1.0) / (a + 1.0))
        }
    };
    let var1 = fold_var(e);
    let var2 = fold_var(1.0 - e);
    FoldMoments { var1, var2, cov, corr: cov / (var1 * var2).sqrt() }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalFoldStats {
    pub corr_hat: f64,
    pub mean1_hat: f64,
    pub mean2_hat: f64,
}

/// Simulate X from the true law, thin with the assumed nuisance, and report
/// sample statistics of the folds. Replicates are generated in chunks, each
/// from its own substream.
pub fn empirical_fold_stats(
    spec: &MismatchSpec,
    n_reps: usize,
    stream: &RandomStream,
) -> Result<EmpiricalFoldStats> {
    if n_reps < 2 {
        return Err(Error::Usage(format!("need at least 2 replicates, got {n_reps}")));
    }
    let family = spec.law.thinning_family(spec.assumed);
    let thinner = Thinner::new(&family, &ThinPlan::two_fold(spec.epsilon)?)?;
    let chunks = n_reps.div_ceil(CHUNK);
    let parts: Vec<Result<(Vec<f64>, Vec<f64>)>> = parallel::install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut s = stream.substream(c as u64);
                let len = CHUNK.min(n_reps - c * CHUNK);
                let (mut a, mut b) = (Vec::with_capacity(len), Vec::with_capacity(len));
                let mut out = [0.0; 2];
                for _ in 0..len {
                    let x = spec.law.sample(&mut s);
                    thinner.thin_into(&[x], &mut s, &mut out)?;
                    a.push(out[0]);
                    b.push(out[1]);
                }
                Ok((a, b))
            })
            .collect()
    });
    let (mut a, mut b) = (Vec::with_capacity(n_reps), Vec::with_capacity(n_reps));
    for p in parts {
        let (pa, pb) = p?;
        a.extend(pa);
        b.extend(pb);
    }
    Ok(EmpiricalFoldStats {
        corr_hat: pearson(&a, &b),
        mean1_hat: mean_var(&a).0,
        mean2_hat: mean_var(&b).0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub nuisance: f64,
    pub corr_theory: f64,
    pub corr_hat: f64,
}

/// One row per assumed nuisance value; grid point `k` uses `stream.substream(k)`.
pub fn mismatch_sweep(
    law: TrueLaw,
    epsilon: f64,
    grid: &[f64],
    n_reps: usize,
    stream: &RandomStream,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Usage("nuisance grid is empty".into()));
    }
    grid.iter()
        .enumerate()
        .map(|(k, &assumed)| {
            let spec = MismatchSpec::new(law, assumed, epsilon)?;
            let theory = mismatch_moments(&spec);
            let emp = empirical_fold_stats(&spec, n_reps, &stream.substream(k as u64))?;
            Ok(SweepRow { nuisance: assumed, corr_theory: theory.corr, corr_hat: emp.corr_hat })
        })
        .collect()
}

/// Parameter whose Fisher information is being allocated across folds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "parameter", rename_all = "snake_case")]
pub enum FisherParameter {
    PoissonRate { rate: f64 },
    BinomialProb { trials: u64, prob: f64 },
    GaussianMean { var: f64 },
    /// Must be known to thin; no allocation claim is made.
    GaussianVariance { var: f64 },
    BinomialTrials { trials: u64, prob: f64 },
    NegativeBinomialSize { size: f64, prob: f64 },
    GammaShape { shape: f64, rate: f64 },
}

impl FisherParameter {
    /// Information in one observation X about the parameter.
    pub fn information(&self) -> Result<f64> {
        match *self {
            FisherParameter::PoissonRate { rate } if rate > 0.0 => Ok(1.0 / rate),
            FisherParameter::BinomialProb { trials, prob } if prob > 0.0 && prob < 1.0 => {
                Ok(trials as f64 / (prob * (1.0 - prob)))
            }
            FisherParameter::GaussianMean { var } if var > 0.0 => Ok(1.0 / var),
            FisherParameter::PoissonRate { .. }
            | FisherParameter::BinomialProb { .. }
            | FisherParameter::GaussianMean { .. } => {
                Err(Error::Domain(format!("invalid parameter values in {self:?}")))
            }
            other => Err(Error::Scope(format!(
                "{other:?} is a nuisance parameter that must be known during thinning"
            ))),
        }
    }
}

/// Information about the parameter carried by each fold: ε_m · I_X(θ).
pub fn fisher_allocation(parameter: &FisherParameter, plan: &ThinPlan) -> Result<Vec<f64>> {
    let total = parameter.information()?;
    Ok(plan.epsilons().iter().map(|e| e * total).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitInformation {
    pub train_dt: f64,
    pub test_dt: f64,
    /// (train, test) information for sample splitting, or why it is not defined.
    pub sample_split: Result<(f64, f64)>,
}

/// Training/test information under thinning versus sample splitting.
///
/// Sample splitting assigns the first ε·n observations to training; callers
/// permute `informations` to study other assignments.
pub fn splitting_information(epsilon: f64, informations: &[f64]) -> Result<SplitInformation> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let total: f64 = informations.iter().sum();
    let n = informations.len();
    let train_size = epsilon * n as f64;
    let sample_split = if (train_size - train_size.round()).abs() > 1e-9 {
        Err(Error::Plan(format!("epsilon * n = {train_size} is not an integer")))
    } else {
        let k = train_size.round() as usize;
        let train: f64 = informations[..k].iter().sum();
        let test: f64 = informations[k..].iter().sum();
        Ok((train, test))
    };
    Ok(SplitInformation {
        train_dt: epsilon * total,
        test_dt: (1.0 - epsilon) * total,
        sample_split,
    })
}
