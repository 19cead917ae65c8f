//! Forward-stepwise selection followed by test-set inference, with the
//! train/test split made either by sample splitting or by Gaussian thinning.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::report::{MethodSummary, SimReport};
use crate::error::{Error, Result};
use crate::family::{Family, ThinPlan};
use crate::parallel;
use crate::rng::RandomStream;
use crate::samplers::standard_normal;
use crate::thinning::{thin_dataset, ThinMode};

/// Covariate whose detection and power are tracked (0-based index of Z₃).
pub const TRACKED: usize = 2;
const CI_LEVEL: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Fresh N(0, 1) covariates every replicate.
    Iid,
    /// One fixed design shared by all replicates whose first row is N(5, 1).
    HighLeverage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionSimConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    /// Value of the first `nonzero` coefficients; the rest are 0.
    pub beta_star: f64,
    pub nonzero: usize,
    pub eps: f64,
    pub n_reps: usize,
    /// Seed of the fixed high-leverage design.
    pub design_seed: u64,
}

impl RegressionSimConfig {
    pub fn iid(beta_star: f64, eps: f64, n_reps: usize) -> Self {
        RegressionSimConfig { scenario: Scenario::Iid, n: 100, p: 20, beta_star, nonzero: 5, eps, n_reps, design_seed: 0 }
    }

    pub fn high_leverage(beta_star: f64, eps: f64, n_reps: usize) -> Self {
        RegressionSimConfig { scenario: Scenario::HighLeverage, n: 42, ..Self::iid(beta_star, eps, n_reps) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.nonzero > self.p || self.n < 3 {
            return Err(Error::Usage(format!("invalid regression shape n = {}, p = {}", self.n, self.p)));
        }
        if self.p <= TRACKED {
            return Err(Error::Usage("need at least 3 covariates".into()));
        }
        if !self.beta_star.is_finite() {
            return Err(Error::Domain(format!("beta_star = {}", self.beta_star)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Domain(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        self.train_size()?;
        Ok(())
    }

    /// Training rows for sample splitting: εn rounded to the nearest integer
    /// (n = 42 at ε = 0.8 gives 34).
    pub fn train_size(&self) -> Result<usize> {
        let k = (self.eps * self.n as f64).round();
        if k < 1.0 || k >= self.n as f64 {
            return Err(Error::Plan(format!("eps = {} leaves an empty train or test set at n = {}", self.eps, self.n)));
        }
        Ok(k as usize)
    }

    pub fn beta(&self) -> DVector<f64> {
        DVector::from_fn(self.p, |j, _| if j < self.nonzero { self.beta_star } else { 0.0 })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionData {
    pub z: DMatrix<f64>,
    pub x: DVector<f64>,
    pub beta: DVector<f64>,
}

/// The shared high-leverage design: row 0 is N(5, 1), the rest N(0, 1).
pub fn fixed_design(cfg: &RegressionSimConfig) -> DMatrix<f64> {
    let mut s = RandomStream::new(cfg.design_seed);
    DMatrix::from_fn(cfg.n, cfg.p, |i, _| if i == 0 { 5.0 } else { 0.0 })
        .map(|m| m + standard_normal(&mut s))
}

/// Design (fresh or fixed by scenario) and X | Z ~ N(Zβ, I).
pub fn gen_regression_data(cfg: &RegressionSimConfig, stream: &RandomStream) -> Result<RegressionData> {
    cfg.validate()?;
    let z = match cfg.scenario {
        Scenario::Iid => {
            let mut s = stream.substream(0);
            DMatrix::from_fn(cfg.n, cfg.p, |_, _| standard_normal(&mut s))
        }
        Scenario::HighLeverage => fixed_design(cfg),
    };
    let beta = cfg.beta();
    let mut s = stream.substream(1);
    let x = &z * &beta + DVector::from_fn(cfg.n, |_, _| standard_normal(&mut s));
    Ok(RegressionData { z, x, beta })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    /// Intercept first, then the selected columns in order.
    pub coef: DVector<f64>,
    pub se: DVector<f64>,
    pub rss: f64,
    pub df_resid: usize,
}

impl OlsFit {
    /// Two-sided t interval for coefficient `j` (0 is the intercept).
    pub fn interval(&self, j: usize, level: f64) -> (f64, f64) {
        let t = StudentsT::new(0.0, 1.0, self.df_resid as f64).expect("df ≥ 1").inverse_cdf(0.5 + level / 2.0);
        (self.coef[j] - t * self.se[j], self.coef[j] + t * self.se[j])
    }
}

/// Least squares of `x` on an intercept plus columns `cols` of `z`.
pub fn ols(z: &DMatrix<f64>, cols: &[usize], x: &DVector<f64>) -> Result<OlsFit> {
    let n = z.nrows();
    let q = cols.len() + 1;
    if n <= q {
        return Err(Error::Usage(format!("{q} coefficients cannot be fitted to {n} rows")));
    }
    let a = DMatrix::from_fn(n, q, |i, j| if j == 0 { 1.0 } else { z[(i, cols[j - 1])] });
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = (0..q).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if (0..q).any(|j| r[(j, j)].abs() <= 1e-10 * scale) {
        return Err(Error::Domain("singular design".into()));
    }
    let qtx = qr.q().transpose() * x;
    let coef = r.solve_upper_triangular(&qtx).expect("nonsingular R");
    let rss = (x - &a * &coef).norm_squared();
    let df_resid = n - q;
    let sigma2 = rss / df_resid as f64;
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(q, q)).expect("nonsingular R");
    let se = DVector::from_fn(q, |j, _| (sigma2 * r_inv.row(j).norm_squared()).sqrt());
    Ok(OlsFit { coef, se, rss, df_resid })
}

fn aic(n: usize, rss: f64, edf: usize) -> f64 {
    let n = n as f64;
    n * (rss / n).ln() + 2.0 * edf as f64
}

/// Forward selection by AIC from the intercept-only model. A model is only
/// tried when it leaves at least one residual degree of freedom; candidates
/// giving a singular design are skipped.
pub fn forward_stepwise(z: &DMatrix<f64>, x: &DVector<f64>, max_terms: usize) -> Result<Vec<usize>> {
    let (n, p) = z.shape();
    if x.len() != n {
        return Err(Error::Usage(format!("response has {} rows, design has {n}", x.len())));
    }
    let mut selected: Vec<usize> = Vec::new();
    let mut current = aic(n, ols(z, &[], x)?.rss, 1);
    while selected.len() < max_terms.min(p) && n > selected.len() + 2 {
        let mut best: Option<(f64, usize)> = None;
        let mut trial = selected.clone();
        trial.push(0);
        for c in (0..p).filter(|c| !selected.contains(c)) {
            *trial.last_mut().expect("pushed") = c;
            let Ok(fit) = ols(z, &trial, x) else { continue };
            let a = aic(n, fit.rss, trial.len() + 1);
            if best.map_or(true, |(b, _)| a < b) {
                best = Some((a, c));
            }
        }
        match best {
            // same 1e-7 improvement threshold as R's step()
            Some((a, c)) if a < current - 1e-7 => {
                selected.push(c);
                current = a;
            }
            _ => break,
        }
    }
    Ok(selected)
}

#[derive(Clone, Copy, Debug, Default)]
struct Outcome {
    detected: bool,
    excludes_zero: Option<bool>,
    flagged: bool,
}

fn select_and_refit(z_train: &DMatrix<f64>, x_train: &DVector<f64>, z_test: &DMatrix<f64>, x_test: &DVector<f64>) -> Result<Outcome> {
    let selected = forward_stepwise(z_train, x_train, z_train.ncols())?;
    let Some(pos) = selected.iter().position(|&c| c == TRACKED) else {
        return Ok(Outcome::default());
    };
    match ols(z_test, &selected, x_test) {
        Ok(fit) => {
            let (lo, hi) = fit.interval(pos + 1, CI_LEVEL);
            Ok(Outcome { detected: true, excludes_zero: Some(lo > 0.0 || hi < 0.0), flagged: false })
        }
        Err(_) => Ok(Outcome { detected: true, excludes_zero: None, flagged: true }),
    }
}

fn rows(z: &DMatrix<f64>, x: &DVector<f64>, idx: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    (z.select_rows(idx), x.select_rows(idx))
}

/// Replicate r draws from `stream.substream(r)`: data from its substream 0,
/// the split from 1 and the thinning from 2. Both arms see the same data.
pub fn run_split_comparison(cfg: &RegressionSimConfig, stream: &RandomStream) -> Result<SimReport> {
    cfg.validate()?;
    if cfg.n_reps == 0 {
        return Err(Error::Usage("need at least one replicate".into()));
    }
    let n_train = cfg.train_size()?;
    let plan = ThinPlan::two_fold(cfg.eps)?;
    let family = Family::Gaussian { var: 1.0 };
    let outcomes: Vec<(Outcome, Outcome)> = parallel::install(|| {
        (0..cfg.n_reps)
            .into_par_iter()
            .map(|r| {
                let rs = stream.substream(r as u64);
                let data = gen_regression_data(cfg, &rs.substream(0))?;

                let mut ss = rs.substream(1);
                let mut perm: Vec<usize> = (0..cfg.n).collect();
                for i in 0..n_train {
                    let j = i + ss.index(cfg.n - i);
                    perm.swap(i, j);
                }
                let (mut train, mut test) = (perm[..n_train].to_vec(), perm[n_train..].to_vec());
                train.sort_unstable();
                test.sort_unstable();
                let (zt, xt) = rows(&data.z, &data.x, &train);
                let (zs, xs) = rows(&data.z, &data.x, &test);
                let split = select_and_refit(&zt, &xt, &zs, &xs)?;

                let xm = DMatrix::from_column_slice(cfg.n, 1, data.x.as_slice());
                let fs = thin_dataset(&xm, &family, &plan, ThinMode::Elementwise, &rs.substream(2))?;
                let x1 = DVector::from_column_slice(fs.folds[0].as_slice());
                let x2 = DVector::from_column_slice(fs.folds[1].as_slice());
                let thin = select_and_refit(&data.z, &x1, &data.z, &x2)?;
                Ok((thin, split))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let summarize = |name: &str, pick: &dyn Fn(&(Outcome, Outcome)) -> Outcome| {
        let os: Vec<Outcome> = outcomes.iter().map(pick).collect();
        let detected = os.iter().filter(|o| o.detected).count();
        let usable: Vec<bool> = os.iter().filter_map(|o| o.excludes_zero).collect();
        let mut m = MethodSummary::named(name);
        m.eps = Some(cfg.eps);
        m.detection = Some(detected as f64 / os.len() as f64);
        // with no usable detections power is undefined; report 0 over 0
        m.power = Some(if usable.is_empty() { 0.0 } else { usable.iter().filter(|&&b| b).count() as f64 / usable.len() as f64 });
        m.power_denominator = Some(usable.len());
        m.flagged = Some(os.iter().filter(|o| o.flagged).count());
        m
    };
    let experiment = match cfg.scenario {
        Scenario::Iid => "split-iid",
        Scenario::HighLeverage => "split-leverage",
    };
    Ok(SimReport {
        experiment: experiment.into(),
        seed: stream.master_seed(),
        n_reps: cfg.n_reps,
        config: serde_json::to_value(cfg)?,
        methods: vec![summarize("thinning", &|o| o.0), summarize("splitting", &|o| o.1)],
    })
}
