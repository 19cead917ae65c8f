//! Thinnable families and fold-weight plans.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::covariance_factor;

/// A convolution-closed family together with the nuisance parameters that
/// must be known to thin it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Poisson,
    Gaussian { var: f64 },
    MultivariateGaussian { cov: DMatrix<f64> },
    NegativeBinomial { size: f64 },
    Gamma { shape: f64 },
    /// Thinned as `Gamma { shape: 1 }`.
    Exponential,
    Binomial { trials: u64 },
    Multinomial { trials: u64, dims: usize },
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            Family::Poisson | Family::Exponential => Ok(()),
            Family::Gaussian { var } => positive("variance", *var),
            Family::MultivariateGaussian { cov } => covariance_factor(cov).map(|_| ()),
            Family::NegativeBinomial { size } => positive("size", *size),
            Family::Gamma { shape } => positive("shape", *shape),
            Family::Binomial { trials } => {
                if *trials == 0 {
                    Err(Error::Domain("binomial trials must be positive".into()))
                } else {
                    Ok(())
                }
            }
            Family::Multinomial { trials, dims } => {
                if *trials == 0 || *dims == 0 {
                    Err(Error::Domain("multinomial trials and dims must be positive".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Length of one observation: 1 for univariate families.
    pub fn dim(&self) -> usize {
        match self {
            Family::MultivariateGaussian { cov } => cov.nrows(),
            Family::Multinomial { dims, .. } => *dims,
            _ => 1,
        }
    }

    pub fn is_multivariate(&self) -> bool {
        matches!(self, Family::MultivariateGaussian { .. } | Family::Multinomial { .. })
    }

    /// Folds of integer families sum to the input exactly.
    pub fn is_integer(&self) -> bool {
        matches!(
            self,
            Family::Poisson
                | Family::NegativeBinomial { .. }
                | Family::Binomial { .. }
                | Family::Multinomial { .. }
        )
    }

    /// Integer convolution parameter that every ε_m · r must divide into.
    pub fn integer_parameter(&self) -> Option<u64> {
        match self {
            Family::Binomial { trials } | Family::Multinomial { trials, .. } => Some(*trials),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::Gaussian { .. } => "gaussian",
            Family::MultivariateGaussian { .. } => "multivariate_gaussian",
            Family::NegativeBinomial { .. } => "negative_binomial",
            Family::Gamma { .. } => "gamma",
            Family::Exponential => "exponential",
            Family::Binomial { .. } => "binomial",
            Family::Multinomial { .. } => "multinomial",
        }
    }

    /// Checks that `x` (of length `dim()`) lies in the family's support.
    pub fn check_support(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Usage(format!(
                "observation has length {}, {} family expects {}",
                x.len(),
                self.name(),
                self.dim()
            )));
        }
        let count = |v: f64| v >= 0.0 && v.fract() == 0.0 && v.is_finite();
        let bad = |v: f64, why: &str| Err(Error::Support(format!("{v} {why} for {} family", self.name())));
        match self {
            Family::Poisson | Family::NegativeBinomial { .. } => {
                if !count(x[0]) {
                    return bad(x[0], "is not a non-negative integer");
                }
            }
            Family::Gaussian { .. } | Family::MultivariateGaussian { .. } => {
                if let Some(&v) = x.iter().find(|v| !v.is_finite()) {
                    return bad(v, "is not finite");
                }
            }
            Family::Gamma { .. } | Family::Exponential => {
                if !(x[0] >= 0.0 && x[0].is_finite()) {
                    return bad(x[0], "is not a non-negative real");
                }
            }
            Family::Binomial { trials } => {
                if !count(x[0]) || x[0] > *trials as f64 {
                    return bad(x[0], &format!("is not an integer in [0, {trials}]"));
                }
            }
            Family::Multinomial { trials, .. } => {
                if let Some(&v) = x.iter().find(|&&v| !count(v)) {
                    return bad(v, "is not a non-negative integer");
                }
                let total: f64 = x.iter().sum();
                if total != *trials as f64 {
                    return bad(total, &format!("(row total) differs from trials = {trials}"));
                }
            }
        }
        Ok(())
    }
}

/// Fold weights ε₁, …, ε_M.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinPlan {
    epsilons: Vec<f64>,
}

impl ThinPlan {
    pub fn new(epsilons: Vec<f64>) -> Result<Self> {
        if epsilons.len() < 2 {
            return Err(Error::Plan(format!("need at least 2 folds, got {}", epsilons.len())));
        }
        if let Some(e) = epsilons.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::Plan(format!("fold weight {e} outside (0, 1)")));
        }
        let total: f64 = epsilons.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Plan(format!("fold weights sum to {total}, expected 1")));
        }
        Ok(ThinPlan { epsilons })
    }

    /// The two-fold plan (ε, 1 − ε).
    pub fn two_fold(epsilon: f64) -> Result<Self> {
        ThinPlan::new(vec![epsilon, 1.0 - epsilon])
    }

    /// M equal weights 1/M.
    pub fn equal(folds: usize) -> Result<Self> {
        ThinPlan::new(vec![1.0 / folds as f64; folds])
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn folds(&self) -> usize {
        self.epsilons.len()
    }

    /// For binomial and multinomial families, the integer fold sizes ε_m·r.
    pub fn integer_sizes(&self, family: &Family) -> Result<Option<Vec<u64>>> {
        let Some(r) = family.integer_parameter() else {
            return Ok(None);
        };
        let mut sizes = Vec::with_capacity(self.epsilons.len());
        for &e in &self.epsilons {
            let v = e * r as f64;
            let k = v.round();
            if (v - k).abs() > 1e-9 || k < 1.0 {
                return Err(Error::Plan(format!(
                    "epsilon {e} times trials {r} = {v} is not a positive integer"
                )));
            }
            sizes.push(k as u64);
        }
        if sizes.iter().sum::<u64>() != r {
            return Err(Error::Plan(format!("fold sizes {sizes:?} do not sum to trials {r}")));
        }
        Ok(Some(sizes))
    }

    pub fn check_for(&self, family: &Family) -> Result<()> {
        self.integer_sizes(family).map(|_| ())
    }
}
