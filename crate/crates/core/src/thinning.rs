//! Two-fold, multifold and dataset-level thinning.
//!
//! Given one realization `x` of a family member with convolution parameter
//! λ, the folds are drawn from the joint conditional law of M independent
//! summands with parameters ε₁λ, …, ε_Mλ given that they add up to `x`.
//! Each fold then follows the same family with a scaled parameter, the folds
//! are mutually independent, and they sum to `x`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{Family, ThinPlan};
use crate::parallel;
use crate::rng::RandomStream;
use crate::samplers::{
    covariance_factor, dirichlet_into, multinomial_into, multivariate_hypergeometric_into,
    standard_normal,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThinMode {
    /// Every matrix entry is an independent univariate observation.
    Elementwise,
    /// Every row is one multivariate observation.
    Rowwise,
}

/// The folds produced by thinning a dataset, with provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSet {
    pub folds: Vec<DMatrix<f64>>,
    pub plan: ThinPlan,
    pub family: Family,
    pub mode: ThinMode,
    pub seed: u64,
    pub stream_path: Vec<u64>,
}

impl FoldSet {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// Fold `m`, counted from 1.
    pub fn fold(&self, m: usize) -> Result<&DMatrix<f64>> {
        if m == 0 || m > self.folds.len() {
            return Err(Error::Usage(format!("fold index {m} outside 1..={}", self.folds.len())));
        }
        Ok(&self.folds[m - 1])
    }

    /// Elementwise sum of all folds.
    pub fn total(&self) -> DMatrix<f64> {
        let mut it = self.folds.iter();
        let mut acc = it.next().expect("fold set is never empty").clone();
        for f in it {
            acc += f;
        }
        acc
    }
}

/// A family/plan pair validated once and reused across many observations.
#[derive(Clone, Debug)]
pub struct Thinner {
    family: Family,
    plan: ThinPlan,
    /// Σ_{j ≥ m} ε_j for each m.
    tail_weights: Vec<f64>,
    factor: Option<DMatrix<f64>>,
    sizes: Option<Vec<u64>>,
}

impl Thinner {
    pub fn new(family: &Family, plan: &ThinPlan) -> Result<Self> {
        family.validate()?;
        let sizes = plan.integer_sizes(family)?;
        let factor = match family {
            Family::MultivariateGaussian { cov } => Some(covariance_factor(cov)?),
            _ => None,
        };
        let eps = plan.epsilons();
        let mut tail_weights = vec![0.0; eps.len()];
        let mut acc = 0.0;
        for m in (0..eps.len()).rev() {
            acc += eps[m];
            tail_weights[m] = acc;
        }
        Ok(Thinner {
            family: family.clone(),
            plan: plan.clone(),
            tail_weights,
            factor,
            sizes,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn plan(&self) -> &ThinPlan {
        &self.plan
    }

    pub fn folds(&self) -> usize {
        self.plan.folds()
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    /// Thin one observation. `out` is fold-major: `out[m * dim + j]`.
    pub fn thin_into(&self, x: &[f64], stream: &mut RandomStream, out: &mut [f64]) -> Result<()> {
        self.family.check_support(x)?;
        let folds = self.folds();
        let dim = self.dim();
        assert_eq!(out.len(), folds * dim, "output buffer has the wrong length");
        let eps = self.plan.epsilons();
        match &self.family {
            Family::Poisson => multinomial_into(x[0] as u64, eps, stream, out),
            Family::Gaussian { var } => self.recursive_gaussian(x[0], *var, stream, out),
            Family::MultivariateGaussian { .. } => self.recursive_mv_gaussian(x, stream, out),
            Family::NegativeBinomial { size } => {
                let alphas: Vec<f64> = eps.iter().map(|e| e * size).collect();
                let mut p = vec![0.0; folds];
                dirichlet_into(&alphas, stream, &mut p);
                multinomial_into(x[0] as u64, &p, stream, out);
            }
            Family::Gamma { shape } => scaled_dirichlet(x[0], *shape, eps, stream, out),
            Family::Exponential => scaled_dirichlet(x[0], 1.0, eps, stream, out),
            Family::Binomial { .. } => {
                let bins: Vec<f64> = self.sizes().iter().map(|&s| s as f64).collect();
                multivariate_hypergeometric_into(&bins, x[0] as u64, stream, out);
            }
            Family::Multinomial { .. } => {
                let mut remaining = x.to_vec();
                let sizes = self.sizes();
                for m in 0..folds - 1 {
                    let fold = &mut out[m * dim..(m + 1) * dim];
                    multivariate_hypergeometric_into(&remaining, sizes[m], stream, fold);
                    for (r, f) in remaining.iter_mut().zip(fold.iter()) {
                        *r -= f;
                    }
                }
                out[(folds - 1) * dim..].copy_from_slice(&remaining);
            }
        }
        Ok(())
    }

    fn sizes(&self) -> &[u64] {
        self.sizes.as_deref().expect("integer family has fold sizes")
    }

    /// Fold m is split off the remainder with weight ε_m / Σ_{j≥m} ε_j.
    fn recursive_gaussian(&self, x: f64, var: f64, stream: &mut RandomStream, out: &mut [f64]) {
        let eps = self.plan.epsilons();
        let last = eps.len() - 1;
        let mut rest = x;
        for m in 0..last {
            let tail = self.tail_weights[m];
            let w = (eps[m] / tail).min(1.0);
            let sd = (w * (1.0 - w) * tail * var).sqrt();
            let fold = w * rest + sd * standard_normal(stream);
            out[m] = fold;
            rest -= fold;
        }
        out[last] = rest;
    }

    fn recursive_mv_gaussian(&self, x: &[f64], stream: &mut RandomStream, out: &mut [f64]) {
        let factor = self.factor.as_ref().expect("multivariate gaussian has a factor");
        let eps = self.plan.epsilons();
        let dim = x.len();
        let last = eps.len() - 1;
        let mut rest = x.to_vec();
        let mut z = vec![0.0; dim];
        for m in 0..last {
            let tail = self.tail_weights[m];
            let w = (eps[m] / tail).min(1.0);
            let scale = (w * (1.0 - w) * tail).sqrt();
            z.iter_mut().for_each(|v| *v = standard_normal(stream));
            for i in 0..dim {
                let noise: f64 = (0..dim).map(|j| factor[(i, j)] * z[j]).sum();
                let fold = w * rest[i] + scale * noise;
                out[m * dim + i] = fold;
                rest[i] -= fold;
            }
        }
        out[last * dim..].copy_from_slice(&rest);
    }
}

/// x · Dirichlet(ε·shape). Every fold is scaled directly rather than taking
/// the last as x minus the rest, which could cancel to 0 or below.
fn scaled_dirichlet(x: f64, shape: f64, eps: &[f64], stream: &mut RandomStream, out: &mut [f64]) {
    let alphas: Vec<f64> = eps.iter().map(|e| e * shape).collect();
    dirichlet_into(&alphas, stream, out);
    out.iter_mut().for_each(|o| *o *= x);
}

/// Two-fold thinning of one observation with weight ε on the first fold.
pub fn thin(
    x: &[f64],
    family: &Family,
    epsilon: f64,
    stream: &mut RandomStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let thinner = Thinner::new(family, &ThinPlan::two_fold(epsilon)?)?;
    let dim = thinner.dim();
    let mut out = vec![0.0; 2 * dim];
    thinner.thin_into(x, stream, &mut out)?;
    let second = out.split_off(dim);
    Ok((out, second))
}

/// Multifold thinning of one observation. Each fold is a 1 × dim matrix.
pub fn multithin(
    x: &[f64],
    family: &Family,
    plan: &ThinPlan,
    stream: &mut RandomStream,
) -> Result<FoldSet> {
    let thinner = Thinner::new(family, plan)?;
    let dim = thinner.dim();
    let mut out = vec![0.0; plan.folds() * dim];
    let seed = stream.master_seed();
    let stream_path = stream.path().to_vec();
    thinner.thin_into(x, stream, &mut out)?;
    Ok(FoldSet {
        folds: out.chunks(dim).map(|c| DMatrix::from_row_slice(1, dim, c)).collect(),
        plan: plan.clone(),
        family: family.clone(),
        mode: if family.is_multivariate() { ThinMode::Rowwise } else { ThinMode::Elementwise },
        seed,
        stream_path,
    })
}

/// Thin every entry (elementwise) or every row (rowwise) of `x`.
///
/// Entry (i, j) uses `stream.substream(i).substream(j)`; row i uses
/// `stream.substream(i)`. Results do not depend on the worker count, and
/// thinning a top-left submatrix reproduces the corresponding cells.
pub fn thin_dataset(
    x: &DMatrix<f64>,
    family: &Family,
    plan: &ThinPlan,
    mode: ThinMode,
    stream: &RandomStream,
) -> Result<FoldSet> {
    match (mode, family.is_multivariate()) {
        (ThinMode::Elementwise, true) => {
            return Err(Error::Usage(format!(
                "{} is a multivariate family; use rowwise thinning",
                family.name()
            )))
        }
        (ThinMode::Rowwise, false) => {
            return Err(Error::Usage(format!(
                "rowwise thinning needs a multivariate family, got {}",
                family.name()
            )))
        }
        _ => {}
    }
    let thinner = Thinner::new(family, plan)?;
    let (n, d) = x.shape();
    let folds = thinner.folds();
    if mode == ThinMode::Rowwise && d != thinner.dim() {
        return Err(Error::Usage(format!(
            "rows have {d} columns, {} family expects {}",
            family.name(),
            thinner.dim()
        )));
    }

    // rows[i] holds fold-major values for row i: rows[i][m * d + j]
    let rows: Vec<Result<Vec<f64>>> = parallel::install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let row_stream = stream.substream(i as u64);
                let mut buf = vec![0.0; folds * d];
                match mode {
                    ThinMode::Elementwise => {
                        let mut cell = vec![0.0; folds];
                        for j in 0..d {
                            let mut s = row_stream.substream(j as u64);
                            thinner.thin_into(&[x[(i, j)]], &mut s, &mut cell).map_err(|e| at_cell(e, i, Some(j)))?;
                            for m in 0..folds {
                                buf[m * d + j] = cell[m];
                            }
                        }
                    }
                    ThinMode::Rowwise => {
                        let row: Vec<f64> = x.row(i).iter().copied().collect();
                        let mut s = row_stream;
                        thinner.thin_into(&row, &mut s, &mut buf).map_err(|e| at_cell(e, i, None))?;
                    }
                }
                Ok(buf)
            })
            .collect()
    });

    let mut fold_data = vec![vec![0.0; n * d]; folds];
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        for (m, data) in fold_data.iter_mut().enumerate() {
            data[i * d..(i + 1) * d].copy_from_slice(&row[m * d..(m + 1) * d]);
        }
    }
    Ok(FoldSet {
        folds: fold_data.iter().map(|v| DMatrix::from_row_slice(n, d, v)).collect(),
        plan: plan.clone(),
        family: family.clone(),
        mode,
        seed: stream.master_seed(),
        stream_path: stream.path().to_vec(),
    })
}

fn at_cell(e: Error, row: usize, col: Option<usize>) -> Error {
    let loc = match col {
        Some(c) => format!("cell ({}, {})", row + 1, c + 1),
        None => format!("row {}", row + 1),
    };
    match e {
        Error::Support(m) => Error::Support(format!("{loc}: {m}")),
        Error::Usage(m) => Error::Usage(format!("{loc}: {m}")),
        other => other,
    }
}

/// Σ_{j ≠ m} fold_j for fold `m` counted from 1.
pub fn fold_complement(fs: &FoldSet, m: usize) -> Result<DMatrix<f64>> {
    fs.fold(m)?;
    let mut acc: Option<DMatrix<f64>> = None;
    for (idx, f) in fs.folds.iter().enumerate() {
        if idx + 1 == m {
            continue;
        }
        acc = Some(match acc {
            None => f.clone(),
            Some(a) => a + f,
        });
    }
    Ok(acc.expect("at least two folds"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean_var, pearson};
    use proptest::prelude::*;

    #[test]
    fn poisson_two_fold_sums() {
        let mut s = RandomStream::new(1);
        for _ in 0..200 {
            let (a, b) = thin(&[5.0], &Family::Poisson, 0.5, &mut s).unwrap();
            assert!((0.0..=5.0).contains(&a[0]));
            assert_eq!(a[0] + b[0], 5.0);
        }
    }

    #[test]
    fn binomial_plan_error() {
        let mut s = RandomStream::new(1);
        let err = thin(&[3.0], &Family::Binomial { trials: 10 }, 0.25, &mut s).unwrap_err();
        assert!(matches!(err, Error::Plan(_)));
    }

    #[test]
    fn support_errors() {
        let mut s = RandomStream::new(1);
        assert!(matches!(thin(&[-1.0], &Family::Poisson, 0.5, &mut s), Err(Error::Support(_))));
        let fam = Family::Binomial { trials: 4 };
        assert!(matches!(thin(&[5.0], &fam, 0.5, &mut s), Err(Error::Support(_))));
        let plan = ThinPlan::new(vec![1.0]);
        assert!(matches!(plan, Err(Error::Plan(_))));
    }

    #[test]
    fn gaussian_two_fold_moments() {
        // X ~ N(7, 5) redrawn every rep, thinned with ε = 0.44
        let fam = Family::Gaussian { var: 5.0 };
        let thinner = Thinner::new(&fam, &ThinPlan::two_fold(0.44).unwrap()).unwrap();
        let mut s = RandomStream::new(44);
        let n = 100_000;
        let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
        let mut out = [0.0; 2];
        for _ in 0..n {
            let x = 7.0 + 5f64.sqrt() * standard_normal(&mut s);
            thinner.thin_into(&[x], &mut s, &mut out).unwrap();
            a.push(out[0]);
            b.push(out[1]);
        }
        let (m, v) = mean_var(&a);
        assert!((m - 3.08).abs() < 3.0 * (v / n as f64).sqrt(), "mean {m}");
        assert!(pearson(&a, &b).abs() < 0.01);
    }

    #[test]
    fn gamma_three_folds_sum_exactly() {
        let mut s = RandomStream::new(3);
        let fam = Family::Gamma { shape: 3.0 };
        let plan = ThinPlan::new(vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        for _ in 0..1000 {
            let fs = multithin(&[2.4], &fam, &plan, &mut s).unwrap();
            let vals: Vec<f64> = fs.folds.iter().map(|f| f[(0, 0)]).collect();
            assert!(vals.iter().all(|&v| v > 0.0), "{vals:?}");
            assert!((vals.iter().sum::<f64>() - 2.4).abs() <= 2.4 * 1e-12);
        }
    }

    #[test]
    fn poisson_zero_gives_zero_folds() {
        let mut s = RandomStream::new(3);
        let plan = ThinPlan::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let fs = multithin(&[0.0], &Family::Poisson, &plan, &mut s).unwrap();
        assert!(fs.folds.iter().all(|f| f[(0, 0)] == 0.0));
    }

    #[test]
    fn gaussian_multifold_moments() {
        let eps = [0.2, 0.3, 0.5];
        let fam = Family::Gaussian { var: 1.0 };
        let thinner = Thinner::new(&fam, &ThinPlan::new(eps.to_vec()).unwrap()).unwrap();
        let mut s = RandomStream::new(6);
        let n = 100_000;
        let mut cols = vec![Vec::with_capacity(n); 3];
        let mut out = [0.0; 3];
        for _ in 0..n {
            let x = standard_normal(&mut s);
            thinner.thin_into(&[x], &mut s, &mut out).unwrap();
            for m in 0..3 {
                cols[m].push(out[m]);
            }
        }
        for m in 0..3 {
            let (_, v) = mean_var(&cols[m]);
            // SE of a normal sample variance: σ²·sqrt(2/(n-1))
            let se = eps[m] * (2.0 / (n as f64 - 1.0)).sqrt();
            assert!((v - eps[m]).abs() < 3.0 * se, "fold {m}: var {v}");
            for k in m + 1..3 {
                assert!(pearson(&cols[m], &cols[k]).abs() < 0.01);
            }
        }
    }

    #[test]
    fn dataset_of_zeros() {
        let x = DMatrix::zeros(2, 2);
        let fs = thin_dataset(&x, &Family::Poisson, &ThinPlan::equal(3).unwrap(), ThinMode::Elementwise, &RandomStream::new(1))
            .unwrap();
        assert_eq!(fs.len(), 3);
        assert!(fs.folds.iter().all(|f| f.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn dataset_gamma_sum_and_support() {
        let mut s = RandomStream::new(10);
        let x = DMatrix::from_fn(20, 7, |_, _| crate::samplers::standard_gamma(4.0, &mut s) / 2.0);
        let plan = ThinPlan::new(vec![0.2, 0.3, 0.5]).unwrap();
        let fs = thin_dataset(&x, &Family::Gamma { shape: 4.0 }, &plan, ThinMode::Elementwise, &RandomStream::new(2))
            .unwrap();
        let total = fs.total();
        for (t, v) in total.iter().zip(x.iter()) {
            assert!((t - v).abs() <= 1e-9 * v.abs());
        }
        assert!(fs.folds.iter().all(|f| f.iter().all(|&v| v > 0.0)));
    }

    #[test]
    fn dataset_thread_count_invariance() {
        let mut s = RandomStream::new(12);
        let x = DMatrix::from_fn(40, 9, |_, _| crate::samplers::poisson(6.0, &mut s) as f64);
        let plan = ThinPlan::equal(4).unwrap();
        let run = |t| {
            parallel::install_with(t, || {
                thin_dataset(&x, &Family::Poisson, &plan, ThinMode::Elementwise, &RandomStream::new(77)).unwrap()
            })
        };
        let one = run(1);
        let four = run(4);
        let bytes = |fs: &FoldSet| -> Vec<u64> { fs.folds.iter().flat_map(|f| f.iter().map(|v| v.to_bits())).collect() };
        assert_eq!(bytes(&one), bytes(&four));
    }

    #[test]
    fn submatrix_reproduces_cells() {
        let mut s = RandomStream::new(5);
        let x = DMatrix::from_fn(6, 5, |_, _| 1.0 + crate::samplers::standard_gamma(2.0, &mut s));
        let plan = ThinPlan::two_fold(0.3).unwrap();
        let fam = Family::Gamma { shape: 2.0 };
        let stream = RandomStream::new(8);
        let full = thin_dataset(&x, &fam, &plan, ThinMode::Elementwise, &stream).unwrap();
        let sub = x.view((0, 0), (3, 2)).into_owned();
        let part = thin_dataset(&sub, &fam, &plan, ThinMode::Elementwise, &stream).unwrap();
        assert_eq!(part.folds[0], full.folds[0].view((0, 0), (3, 2)).into_owned());
    }

    #[test]
    fn mode_mismatch() {
        let x = DMatrix::from_element(2, 3, 1.0);
        let plan = ThinPlan::two_fold(0.5).unwrap();
        let s = RandomStream::new(1);
        let err = thin_dataset(&x, &Family::Poisson, &plan, ThinMode::Rowwise, &s).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        let mn = Family::Multinomial { trials: 3, dims: 3 };
        let plan3 = ThinPlan::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let err = thin_dataset(&x, &mn, &plan3, ThinMode::Elementwise, &s).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        let fs = thin_dataset(&x, &mn, &plan3, ThinMode::Rowwise, &s).unwrap();
        assert_eq!(fs.total(), x);
        assert!(fs.folds[0].row_iter().all(|r| r.sum() == 1.0));
    }

    #[test]
    fn complement_two_folds_is_other_fold() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 9.0]);
        let fs = thin_dataset(&x, &Family::Poisson, &ThinPlan::two_fold(0.5).unwrap(), ThinMode::Elementwise, &RandomStream::new(3))
            .unwrap();
        assert_eq!(fold_complement(&fs, 1).unwrap(), fs.folds[1]);
        assert_eq!(fold_complement(&fs, 1).unwrap() + &fs.folds[0], x);
        assert!(matches!(fold_complement(&fs, 0), Err(Error::Usage(_))));
        assert!(matches!(fold_complement(&fs, 3), Err(Error::Usage(_))));
    }

    #[test]
    fn complement_mean_for_five_folds() {
        let lambda = 4.0;
        let plan = ThinPlan::equal(5).unwrap();
        let thinner = Thinner::new(&Family::Poisson, &plan).unwrap();
        let mut s = RandomStream::new(55);
        let n = 100_000;
        let mut comp = Vec::with_capacity(n);
        let mut out = [0.0; 5];
        for _ in 0..n {
            let x = crate::samplers::poisson(lambda, &mut s) as f64;
            thinner.thin_into(&[x], &mut s, &mut out).unwrap();
            comp.push(x - out[2]);
        }
        let (m, v) = mean_var(&comp);
        assert!((m - 0.8 * lambda).abs() < 3.0 * (v / n as f64).sqrt(), "mean {m}");
    }

    proptest! {
        #[test]
        fn integer_families_add_up_exactly(x in 0u32..500, seed in any::<u64>(), e in 1u64..10) {
            let mut s = RandomStream::new(seed);
            let eps = e as f64 / 10.0;
            for fam in [Family::Poisson, Family::NegativeBinomial { size: 2.5 }] {
                let (a, b) = thin(&[x as f64], &fam, eps, &mut s).unwrap();
                prop_assert_eq!(a[0] + b[0], x as f64);
                prop_assert!(a[0] >= 0.0 && b[0] >= 0.0);
            }
            let fam = Family::Binomial { trials: 500 };
            let (a, b) = thin(&[x as f64], &fam, eps, &mut s).unwrap();
            prop_assert_eq!(a[0] + b[0], x as f64);
            prop_assert!(a[0] <= eps * 500.0 + 1e-9);
        }

        #[test]
        fn continuous_families_add_up(x in 1e-3f64..1e4, seed in any::<u64>(), w in prop::collection::vec(1u32..20, 2..6)) {
            let total: u32 = w.iter().sum();
            let mut eps: Vec<f64> = w.iter().map(|&v| v as f64 / total as f64).collect();
            let head: f64 = eps[..eps.len() - 1].iter().sum();
            *eps.last_mut().unwrap() = 1.0 - head;
            let plan = ThinPlan::new(eps).unwrap();
            let mut s = RandomStream::new(seed);
            for fam in [Family::Gamma { shape: 0.7 }, Family::Exponential, Family::Gaussian { var: 2.0 }] {
                let fs = multithin(&[x], &fam, &plan, &mut s).unwrap();
                let sum: f64 = fs.folds.iter().map(|f| f[(0, 0)]).sum();
                prop_assert!((sum - x).abs() <= 1e-9 * x.abs());
            }
        }
    }

    #[test]
    fn gamma_folds_stay_positive_at_small_shapes() {
        let t = Thinner::new(&Family::Gamma { shape: 0.5 }, &ThinPlan::equal(5).unwrap()).unwrap();
        let mut s = RandomStream::new(17);
        let mut out = [0.0; 5];
        for i in 0..200_000 {
            let x = 1.0 + (i % 7) as f64;
            t.thin_into(&[x], &mut s, &mut out).unwrap();
            assert!(out.iter().all(|&v| v > 0.0), "{out:?}");
            assert!((out.iter().sum::<f64>() - x).abs() <= 1e-12 * x);
        }
    }
}
