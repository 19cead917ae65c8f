//! Random variate generation for the conditional laws used by thinning.
//!
//! Scalar laws are described by [`PrimitiveDist`], vector laws by
//! [`VectorDist`]. Both validate their parameters on every draw; the
//! lower-level functions (`standard_gamma`, `binomial`, ...) skip validation
//! and are used in hot loops after a plan has already been checked.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::RandomStream;
use crate::special::ln_gamma;

/// Populations up to this size are sampled by exact inversion.
pub const HYPERGEOMETRIC_INVERSION_LIMIT: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PrimitiveDist {
    Binomial { trials: u64, prob: f64 },
    Beta { a: f64, b: f64 },
    /// Shape/rate parameterization, mean `shape / rate`.
    Gamma { shape: f64, rate: f64 },
    Hypergeometric { successes: u64, failures: u64, draws: u64 },
    Normal { mean: f64, var: f64 },
    BetaBinomial { trials: u64, a: f64, b: f64 },
    Poisson { rate: f64 },
    /// Failures before the `size`-th success, mean `size (1 - prob) / prob`.
    NegativeBinomial { size: f64, prob: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} must be positive and finite, got {v}"))
    }
}

fn probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        domain(format!("{name} must lie in [0, 1], got {p}"))
    }
}

impl PrimitiveDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PrimitiveDist::Binomial { prob, .. } => probability("prob", prob),
            PrimitiveDist::Beta { a, b } => positive("a", a).and(positive("b", b)),
            PrimitiveDist::Gamma { shape, rate } => {
                positive("shape", shape).and(positive("rate", rate))
            }
            PrimitiveDist::Hypergeometric { successes, failures, draws } => {
                if draws > successes + failures {
                    domain(format!(
                        "cannot draw {draws} from a population of {}",
                        successes + failures
                    ))
                } else {
                    Ok(())
                }
            }
            PrimitiveDist::Normal { mean, var } => {
                if !mean.is_finite() {
                    domain("normal mean must be finite")
                } else if !(var >= 0.0 && var.is_finite()) {
                    domain(format!("normal variance must be non-negative, got {var}"))
                } else {
                    Ok(())
                }
            }
            PrimitiveDist::BetaBinomial { a, b, .. } => positive("a", a).and(positive("b", b)),
            PrimitiveDist::Poisson { rate } => {
                if rate >= 0.0 && rate.is_finite() {
                    Ok(())
                } else {
                    domain(format!("poisson rate must be non-negative, got {rate}"))
                }
            }
            PrimitiveDist::NegativeBinomial { size, prob } => {
                positive("size", size)?;
                if prob > 0.0 && prob <= 1.0 {
                    Ok(())
                } else {
                    domain(format!("negative binomial prob must lie in (0, 1], got {prob}"))
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PrimitiveDist::Binomial { trials, prob } => trials as f64 * prob,
            PrimitiveDist::Beta { a, b } => a / (a + b),
            PrimitiveDist::Gamma { shape, rate } => shape / rate,
            PrimitiveDist::Hypergeometric { successes, failures, draws } => {
                let n = (successes + failures) as f64;
                if n == 0.0 {
                    0.0
                } else {
                    draws as f64 * successes as f64 / n
                }
            }
            PrimitiveDist::Normal { mean, .. } => mean,
            PrimitiveDist::BetaBinomial { trials, a, b } => trials as f64 * a / (a + b),
            PrimitiveDist::Poisson { rate } => rate,
            PrimitiveDist::NegativeBinomial { size, prob } => size * (1.0 - prob) / prob,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            PrimitiveDist::Binomial { trials, prob } => trials as f64 * prob * (1.0 - prob),
            PrimitiveDist::Beta { a, b } => a * b / ((a + b).powi(2) * (a + b + 1.0)),
            PrimitiveDist::Gamma { shape, rate } => shape / (rate * rate),
            PrimitiveDist::Hypergeometric { successes, failures, draws } => {
                let (k, n, d) = (successes as f64, (successes + failures) as f64, draws as f64);
                if n <= 1.0 {
                    0.0
                } else {
                    d * (k / n) * (1.0 - k / n) * (n - d) / (n - 1.0)
                }
            }
            PrimitiveDist::Normal { var, .. } => var,
            PrimitiveDist::BetaBinomial { trials, a, b } => {
                let n = trials as f64;
                n * a * b * (a + b + n) / ((a + b).powi(2) * (a + b + 1.0))
            }
            PrimitiveDist::Poisson { rate } => rate,
            PrimitiveDist::NegativeBinomial { size, prob } => size * (1.0 - prob) / (prob * prob),
        }
    }
}

/// Draw one variate from `dist`.
pub fn draw(dist: &PrimitiveDist, stream: &mut RandomStream) -> Result<f64> {
    dist.validate()?;
    Ok(match *dist {
        PrimitiveDist::Binomial { trials, prob } => binomial(trials, prob, stream) as f64,
        PrimitiveDist::Beta { a, b } => beta(a, b, stream),
        PrimitiveDist::Gamma { shape, rate } => standard_gamma(shape, stream) / rate,
        PrimitiveDist::Hypergeometric { successes, failures, draws } => {
            hypergeometric(successes, failures, draws, stream) as f64
        }
        PrimitiveDist::Normal { mean, var } => {
            if var == 0.0 {
                mean
            } else {
                mean + var.sqrt() * standard_normal(stream)
            }
        }
        PrimitiveDist::BetaBinomial { trials, a, b } => beta_binomial(trials, a, b, stream) as f64,
        PrimitiveDist::Poisson { rate } => poisson(rate, stream) as f64,
        PrimitiveDist::NegativeBinomial { size, prob } => {
            if prob == 1.0 {
                0.0
            } else {
                let lambda = standard_gamma(size, stream) * (1.0 - prob) / prob;
                poisson(lambda, stream) as f64
            }
        }
    })
}

pub fn standard_normal(stream: &mut RandomStream) -> f64 {
    StandardNormal.sample(stream)
}

/// Marsaglia–Tsang for shape ≥ 1.
fn marsaglia_tsang(shape: f64, stream: &mut RandomStream) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(stream);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = stream.uniform_open();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Gamma(shape, 1) variate. Shapes below one are boosted:
/// G(a) = G(a + 1) · U^(1/a).
pub fn standard_gamma(shape: f64, stream: &mut RandomStream) -> f64 {
    if shape >= 1.0 {
        marsaglia_tsang(shape, stream)
    } else {
        let g = marsaglia_tsang(shape + 1.0, stream);
        g * stream.uniform_open().powf(1.0 / shape)
    }
}

/// Logarithm of a Gamma(shape, 1) variate, finite even when the variate
/// itself would underflow (very small shapes).
pub fn ln_standard_gamma(shape: f64, stream: &mut RandomStream) -> f64 {
    if shape >= 1.0 {
        marsaglia_tsang(shape, stream).ln()
    } else {
        marsaglia_tsang(shape + 1.0, stream).ln() + stream.uniform_open().ln() / shape
    }
}

/// Beta(a, b) via a ratio of gamma variates, computed in log space.
pub fn beta(a: f64, b: f64, stream: &mut RandomStream) -> f64 {
    let la = ln_standard_gamma(a, stream);
    let lb = ln_standard_gamma(b, stream);
    1.0 / (1.0 + (lb - la).exp())
}

pub fn binomial(trials: u64, prob: f64, stream: &mut RandomStream) -> u64 {
    if trials == 0 || prob <= 0.0 {
        return 0;
    }
    if prob >= 1.0 {
        return trials;
    }
    rand_distr::Binomial::new(trials, prob)
        .expect("validated binomial parameters")
        .sample(stream)
}

pub fn poisson(rate: f64, stream: &mut RandomStream) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    let v: f64 = rand_distr::Poisson::new(rate)
        .expect("validated poisson rate")
        .sample(stream);
    v as u64
}

pub fn beta_binomial(trials: u64, a: f64, b: f64, stream: &mut RandomStream) -> u64 {
    if trials == 0 {
        return 0;
    }
    let p = beta(a, b, stream);
    binomial(trials, p, stream)
}

/// Number of successes when drawing `draws` items without replacement from
/// `successes + failures` items. Caller guarantees `draws ≤ successes + failures`.
pub fn hypergeometric(successes: u64, failures: u64, draws: u64, stream: &mut RandomStream) -> u64 {
    let population = successes + failures;
    let lo = draws.saturating_sub(failures);
    let hi = successes.min(draws);
    if lo == hi {
        return lo;
    }
    if population <= HYPERGEOMETRIC_INVERSION_LIMIT {
        hypergeometric_inversion(successes, failures, draws, lo, hi, stream)
    } else {
        rand_distr::Hypergeometric::new(population, successes, draws)
            .expect("validated hypergeometric parameters")
            .sample(stream)
    }
}

/// Inverse-CDF sampling. Weights are built outward from the mode by the pmf
/// ratio recurrence, so nothing underflows for large populations; tails
/// below 1e-20 of the mode weight are dropped.
fn hypergeometric_inversion(
    successes: u64,
    failures: u64,
    draws: u64,
    lo: u64,
    hi: u64,
    stream: &mut RandomStream,
) -> u64 {
    let (s, f, n) = (successes as f64, failures as f64, draws as f64);
    let mode = (((n + 1.0) * (s + 1.0)) / (s + f + 2.0)).floor() as u64;
    let mode = mode.clamp(lo, hi);

    let mut below: Vec<f64> = Vec::new();
    let mut w = 1.0;
    let mut k = mode;
    while k > lo {
        let kf = k as f64;
        // p(k-1) / p(k)
        w *= kf * (f - n + kf) / ((s - kf + 1.0) * (n - kf + 1.0));
        if w < 1e-20 {
            break;
        }
        below.push(w);
        k -= 1;
    }
    let start = mode - below.len() as u64;

    let mut above: Vec<f64> = Vec::new();
    let mut w = 1.0;
    let mut k = mode;
    while k < hi {
        let kf = k as f64;
        // p(k+1) / p(k)
        w *= (s - kf) * (n - kf) / ((kf + 1.0) * (f - n + kf + 1.0));
        if w < 1e-20 {
            break;
        }
        above.push(w);
        k += 1;
    }

    let total: f64 = below.iter().sum::<f64>() + 1.0 + above.iter().sum::<f64>();
    let mut target = stream.uniform() * total;
    let weights = below.iter().rev().chain(std::iter::once(&1.0)).chain(above.iter());
    let mut value = start;
    let last = mode + above.len() as u64;
    for &wk in weights {
        if target < wk || value == last {
            return value;
        }
        target -= wk;
        value += 1;
    }
    last
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum VectorDist {
    Dirichlet { alphas: Vec<f64> },
    Multinomial { trials: u64, probs: Vec<f64> },
    MultivariateHypergeometric { bin_counts: Vec<u64>, draws: u64 },
    DirichletMultinomial { trials: u64, alphas: Vec<f64> },
    MultivariateNormal { mean: Vec<f64>, cov: DMatrix<f64> },
}

fn check_simplex(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return domain("probability vector is empty");
    }
    for &p in probs {
        probability("probability", p)?;
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return domain(format!("probabilities sum to {total}, expected 1"));
    }
    Ok(())
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return domain("concentration vector is empty");
    }
    alphas.iter().try_for_each(|&a| positive("alpha", a))
}

impl VectorDist {
    pub fn validate(&self) -> Result<()> {
        match self {
            VectorDist::Dirichlet { alphas } => check_alphas(alphas),
            VectorDist::Multinomial { probs, .. } => check_simplex(probs),
            VectorDist::MultivariateHypergeometric { bin_counts, draws } => {
                let total: u64 = bin_counts.iter().sum();
                if *draws > total {
                    domain(format!("cannot draw {draws} from a population of {total}"))
                } else {
                    Ok(())
                }
            }
            VectorDist::DirichletMultinomial { alphas, .. } => check_alphas(alphas),
            VectorDist::MultivariateNormal { mean, cov } => {
                if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
                    return Err(Error::Usage(format!(
                        "covariance is {}x{}, mean has length {}",
                        cov.nrows(),
                        cov.ncols(),
                        mean.len()
                    )));
                }
                covariance_factor(cov).map(|_| ())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorDist::Dirichlet { alphas } | VectorDist::DirichletMultinomial { alphas, .. } => {
                alphas.len()
            }
            VectorDist::Multinomial { probs, .. } => probs.len(),
            VectorDist::MultivariateHypergeometric { bin_counts, .. } => bin_counts.len(),
            VectorDist::MultivariateNormal { mean, .. } => mean.len(),
        }
    }
}

/// Draw one vector variate from `dist`.
pub fn draw_vector(dist: &VectorDist, stream: &mut RandomStream) -> Result<Vec<f64>> {
    dist.validate()?;
    let mut out = vec![0.0; dist.dim()];
    match dist {
        VectorDist::Dirichlet { alphas } => dirichlet_into(alphas, stream, &mut out),
        VectorDist::Multinomial { trials, probs } => multinomial_into(*trials, probs, stream, &mut out),
        VectorDist::MultivariateHypergeometric { bin_counts, draws } => {
            let counts: Vec<f64> = bin_counts.iter().map(|&c| c as f64).collect();
            multivariate_hypergeometric_into(&counts, *draws, stream, &mut out)
        }
        VectorDist::DirichletMultinomial { trials, alphas } => {
            let mut p = vec![0.0; alphas.len()];
            dirichlet_into(alphas, stream, &mut p);
            multinomial_into(*trials, &p, stream, &mut out);
        }
        VectorDist::MultivariateNormal { mean, cov } => {
            let factor = covariance_factor(cov)?;
            let z: Vec<f64> = (0..mean.len()).map(|_| standard_normal(stream)).collect();
            for (i, o) in out.iter_mut().enumerate() {
                *o = mean[i] + (0..z.len()).map(|j| factor[(i, j)] * z[j]).sum::<f64>();
            }
        }
    }
    Ok(out)
}

/// Dirichlet draw via normalized gamma variates (log-space normalization).
pub fn dirichlet_into(alphas: &[f64], stream: &mut RandomStream, out: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for (o, &a) in out.iter_mut().zip(alphas) {
        *o = ln_standard_gamma(a, stream);
        max = max.max(*o);
    }
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Multinomial draw by sequential conditional binomials.
pub fn multinomial_into(trials: u64, probs: &[f64], stream: &mut RandomStream, out: &mut [f64]) {
    let mut remaining = trials;
    let mut mass = 1.0;
    let last = probs.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        if i == last || remaining == 0 {
            out[i] = if i == last { remaining as f64 } else { 0.0 };
            continue;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
        let k = binomial(remaining, q, stream);
        out[i] = k as f64;
        remaining -= k;
        mass -= p;
    }
}

/// Multivariate hypergeometric draw by sequential univariate conditioning.
/// `bin_counts` hold exact non-negative integers.
pub fn multivariate_hypergeometric_into(
    bin_counts: &[f64],
    draws: u64,
    stream: &mut RandomStream,
    out: &mut [f64],
) {
    let mut remaining_pop: u64 = bin_counts.iter().map(|&c| c as u64).sum();
    let mut remaining_draws = draws;
    for (o, &c) in out.iter_mut().zip(bin_counts) {
        let c = c as u64;
        remaining_pop -= c;
        let k = if remaining_draws == 0 {
            0
        } else {
            hypergeometric(c, remaining_pop, remaining_draws, stream)
        };
        *o = k as f64;
        remaining_draws -= k;
    }
}

/// A factor `L` with `L Lᵀ = cov`: Cholesky when positive definite, otherwise
/// the symmetric square root from an eigendecomposition (semi-definite case).
pub fn covariance_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !cov.is_square() || cov.nrows() == 0 {
        return domain("covariance must be a non-empty square matrix");
    }
    let scale = cov.amax().max(1.0);
    for i in 0..cov.nrows() {
        for j in 0..i {
            if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-10 * scale {
                return domain(format!("covariance not symmetric at ({i}, {j})"));
            }
        }
    }
    if let Some(ch) = cov.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = SymmetricEigen::new(cov.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min < -1e-8 * max.abs().max(f64::MIN_POSITIVE) {
        return domain(format!("covariance is not positive semi-definite (min eigenvalue {min})"));
    }
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals))
}

/// Natural log of the hypergeometric pmf, used by tests and diagnostics.
pub fn hypergeometric_ln_pmf(k: u64, successes: u64, failures: u64, draws: u64) -> f64 {
    let lc = |n: u64, r: u64| {
        ln_gamma(n as f64 + 1.0) - ln_gamma(r as f64 + 1.0) - ln_gamma((n - r) as f64 + 1.0)
    };
    lc(successes, k) + lc(failures, draws - k) - lc(successes + failures, draws)
}
