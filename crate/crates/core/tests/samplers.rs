use statrs::distribution::{Beta, Continuous, ContinuousCDF, Discrete, Gamma, Hypergeometric, Normal};
use thinlab::samplers::{draw, draw_vector, PrimitiveDist, VectorDist};
use thinlab::stats::{ks_distance, mean_var, pearson, tv_distance_counts};
use thinlab::RandomStream;

const N: usize = 100_000;

fn sample(d: &PrimitiveDist, seed: u64, n: usize) -> Vec<f64> {
    let mut s = RandomStream::new(seed);
    (0..n).map(|_| draw(d, &mut s).unwrap()).collect()
}

/// Mean and variance within 4 standard errors. The SE of the sample
/// variance uses the sample fourth central moment.
fn assert_moments(xs: &[f64], mean: f64, var: f64, what: &str) {
    let n = xs.len() as f64;
    let (m, v) = mean_var(xs);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let se_m = (var / n).sqrt();
    let se_v = ((m4 - v * v) / n).sqrt();
    assert!((m - mean).abs() < 4.0 * se_m, "{what}: mean {m} vs {mean}");
    assert!((v - var).abs() < 4.0 * se_v, "{what}: var {v} vs {var}");
}

#[test]
fn degenerate_parameters() {
    let mut s = RandomStream::new(1);
    assert_eq!(draw(&PrimitiveDist::Binomial { trials: 9, prob: 0.0 }, &mut s).unwrap(), 0.0);
    assert_eq!(draw(&PrimitiveDist::Binomial { trials: 9, prob: 1.0 }, &mut s).unwrap(), 9.0);
    assert_eq!(
        draw(&PrimitiveDist::Hypergeometric { successes: 3, failures: 0, draws: 2 }, &mut s).unwrap(),
        2.0
    );
    assert_eq!(draw(&PrimitiveDist::Normal { mean: 2.5, var: 0.0 }, &mut s).unwrap(), 2.5);
    assert_eq!(draw_vector(&VectorDist::Dirichlet { alphas: vec![1.0] }, &mut s).unwrap(), vec![1.0]);
    assert_eq!(
        draw_vector(&VectorDist::Multinomial { trials: 7, probs: vec![1.0, 0.0, 0.0] }, &mut s).unwrap(),
        vec![7.0, 0.0, 0.0]
    );
    assert_eq!(
        draw_vector(&VectorDist::MultivariateHypergeometric { bin_counts: vec![0, 4, 0], draws: 3 }, &mut s)
            .unwrap(),
        vec![0.0, 3.0, 0.0]
    );
}

#[test]
fn invalid_parameters_are_domain_errors() {
    let mut s = RandomStream::new(1);
    let bad = [
        PrimitiveDist::Binomial { trials: 3, prob: 1.5 },
        PrimitiveDist::Beta { a: 0.0, b: 1.0 },
        PrimitiveDist::Gamma { shape: -1.0, rate: 1.0 },
        PrimitiveDist::Hypergeometric { successes: 2, failures: 2, draws: 5 },
        PrimitiveDist::Normal { mean: 0.0, var: -1.0 },
        PrimitiveDist::Poisson { rate: f64::NAN },
        PrimitiveDist::NegativeBinomial { size: 2.0, prob: 0.0 },
    ];
    for d in &bad {
        assert!(matches!(draw(d, &mut s), Err(thinlab::Error::Domain(_))), "{d:?}");
    }
    let vbad = [
        VectorDist::Dirichlet { alphas: vec![] },
        VectorDist::Multinomial { trials: 3, probs: vec![0.5, 0.6] },
        VectorDist::MultivariateHypergeometric { bin_counts: vec![1, 1], draws: 3 },
    ];
    for d in &vbad {
        assert!(matches!(draw_vector(d, &mut s), Err(thinlab::Error::Domain(_))), "{d:?}");
    }
}

#[test]
fn gamma_seven_five_mean() {
    let xs = sample(&PrimitiveDist::Gamma { shape: 7.0, rate: 5.0 }, 11, N);
    assert_moments(&xs, 1.4, 7.0 / 25.0, "gamma(7, 5)");
}

#[test]
fn scalar_moments_within_four_se() {
    let cases = [
        (PrimitiveDist::Binomial { trials: 30, prob: 0.3 }, 9.0, 6.3),
        (PrimitiveDist::Beta { a: 2.0, b: 5.0 }, 2.0 / 7.0, 10.0 / (49.0 * 8.0)),
        (PrimitiveDist::Gamma { shape: 0.4, rate: 2.0 }, 0.2, 0.1),
        (PrimitiveDist::Hypergeometric { successes: 12, failures: 8, draws: 7 }, 4.2, 7.0 * 0.6 * 0.4 * 13.0 / 19.0),
        (PrimitiveDist::Normal { mean: -3.0, var: 4.0 }, -3.0, 4.0),
        // a b (a + b + n) n / ((a + b)² (a + b + 1))
        (PrimitiveDist::BetaBinomial { trials: 10, a: 2.0, b: 3.0 }, 4.0, 2.0 * 3.0 * 15.0 * 10.0 / (25.0 * 6.0)),
        (PrimitiveDist::Poisson { rate: 3.7 }, 3.7, 3.7),
        (PrimitiveDist::NegativeBinomial { size: 7.0, prob: 0.7 }, 3.0, 3.0 / 0.7),
    ];
    for (k, (d, mean, var)) in cases.iter().enumerate() {
        let xs = sample(d, 100 + k as u64, N);
        assert_moments(&xs, *mean, *var, &format!("{d:?}"));
        assert!((d.mean() - mean).abs() < 1e-12 && (d.variance() - var).abs() < 1e-12, "{d:?}");
    }
}

#[test]
fn continuous_laws_pass_ks() {
    let beta = Beta::new(0.7, 3.0).unwrap();
    let xs = sample(&PrimitiveDist::Beta { a: 0.7, b: 3.0 }, 5, N);
    assert!(ks_distance(&xs, |x| beta.cdf(x)) < 0.01);

    for (k, &shape) in [0.5, 1.0, 7.0].iter().enumerate() {
        let g = Gamma::new(shape, 2.0).unwrap();
        let xs = sample(&PrimitiveDist::Gamma { shape, rate: 2.0 }, 6 + k as u64, N);
        assert!(ks_distance(&xs, |x| g.cdf(x)) < 0.01, "shape {shape}");
    }
    // statrs underflows to 0 below about 1e-20 at this shape; use the series
    let xs = sample(&PrimitiveDist::Gamma { shape: 0.05, rate: 2.0 }, 9, N);
    assert!(ks_distance(&xs, |x| gamma_cdf_series(0.05, 2.0 * x)) < 0.01);

    let nd = Normal::new(1.0, 2.0).unwrap();
    let xs = sample(&PrimitiveDist::Normal { mean: 1.0, var: 4.0 }, 12, N);
    assert!(ks_distance(&xs, |x| nd.cdf(x)) < 0.01);
}

/// Regularized lower incomplete gamma by its power series,
/// x^a e^(-x) Σ x^n / Γ(a + n + 1); converges for every x.
fn gamma_cdf_series(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut term = 1.0 / a;
    let mut sum = term;
    for n in 1..10_000 {
        term *= x / (a + n as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    (a * x.ln() - x - statrs::function::gamma::ln_gamma(a)).exp() * sum
}

#[test]
fn gamma_series_oracle_agrees_with_statrs_in_range() {
    let g = Gamma::new(0.7, 1.0).unwrap();
    for x in [1e-3, 0.1, 1.0, 5.0, 20.0] {
        assert!((gamma_cdf_series(0.7, x) - g.cdf(x)).abs() < 1e-10, "x {x}");
    }
}

#[test]
fn tiny_shape_beta_splits_evenly() {
    // Beta(0.01, 0.01) puts almost all mass near 0 and 1; the draws must
    // still be valid and split close to evenly.
    let xs = sample(&PrimitiveDist::Beta { a: 0.01, b: 0.01 }, 3, 20_000);
    assert!(xs.iter().all(|&x| (0.0..=1.0).contains(&x)));
    let low = xs.iter().filter(|&&x| x < 0.5).count() as f64 / xs.len() as f64;
    assert!((low - 0.5).abs() < 4.0 * (0.25 / xs.len() as f64).sqrt());
    // sanity that the reference density is what we think it is
    assert!(Beta::new(0.01, 0.01).unwrap().pdf(0.5) < 0.02);
}

#[test]
fn hypergeometric_pmf_matches_reference() {
    // statrs parameterizes by (population, successes, draws)
    let reference = Hypergeometric::new(50, 20, 15).unwrap();
    let xs = sample(&PrimitiveDist::Hypergeometric { successes: 20, failures: 30, draws: 15 }, 9, N);
    assert!(tv_distance_counts(&xs, |k| reference.pmf(k), 15) < 0.01);
    assert!(xs.iter().all(|&x| (0.0..=15.0).contains(&x)));
}

#[test]
fn integer_support_bounds() {
    let xs = sample(&PrimitiveDist::Hypergeometric { successes: 5, failures: 3, draws: 6 }, 4, 20_000);
    // at least draws - failures successes, at most min(successes, draws)
    assert!(xs.iter().all(|&x| (3.0..=5.0).contains(&x) && x.fract() == 0.0));
    let xs = sample(&PrimitiveDist::BetaBinomial { trials: 4, a: 0.3, b: 0.3 }, 4, 20_000);
    assert!(xs.iter().all(|&x| (0.0..=4.0).contains(&x) && x.fract() == 0.0));
    let xs = sample(&PrimitiveDist::NegativeBinomial { size: 0.5, prob: 0.2 }, 4, 20_000);
    assert!(xs.iter().all(|&x| x >= 0.0 && x.fract() == 0.0));
}

#[test]
fn dirichlet_multinomial_mean() {
    let mut s = RandomStream::new(21);
    let d = VectorDist::DirichletMultinomial { trials: 20, alphas: vec![2.0, 2.0] };
    let draws: Vec<Vec<f64>> = (0..N).map(|_| draw_vector(&d, &mut s).unwrap()).collect();
    assert!(draws.iter().all(|v| v.iter().sum::<f64>() == 20.0));
    let first: Vec<f64> = draws.iter().map(|v| v[0]).collect();
    // beta-binomial(20, 2, 2) marginal: variance 20·2·2·24 / (16·5) = 24
    assert_moments(&first, 10.0, 24.0, "dirichlet-multinomial margin");
}

#[test]
fn vector_laws_have_simplex_or_count_structure() {
    let mut s = RandomStream::new(22);
    let alphas = vec![0.5, 1.5, 3.0];
    let d = VectorDist::Dirichlet { alphas: alphas.clone() };
    let draws: Vec<Vec<f64>> = (0..N).map(|_| draw_vector(&d, &mut s).unwrap()).collect();
    assert!(draws.iter().all(|v| (v.iter().sum::<f64>() - 1.0).abs() < 1e-12 && v.iter().all(|&p| p >= 0.0)));
    let a0: f64 = alphas.iter().sum();
    for (j, a) in alphas.iter().enumerate() {
        let col: Vec<f64> = draws.iter().map(|v| v[j]).collect();
        let m = a / a0;
        assert_moments(&col, m, m * (1.0 - m) / (a0 + 1.0), "dirichlet margin");
    }

    let d = VectorDist::MultivariateHypergeometric { bin_counts: vec![6, 10, 4], draws: 8 };
    let draws: Vec<Vec<f64>> = (0..N).map(|_| draw_vector(&d, &mut s).unwrap()).collect();
    assert!(draws.iter().all(|v| v.iter().sum::<f64>() == 8.0 && v[0] <= 6.0 && v[2] <= 4.0));
    let col: Vec<f64> = draws.iter().map(|v| v[1]).collect();
    assert_moments(&col, 4.0, 8.0 * 0.5 * 0.5 * 12.0 / 19.0, "multivariate hypergeometric margin");
}

#[test]
fn multivariate_normal_covariance() {
    let cov = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, -0.6, -0.6, 1.0]);
    let d = VectorDist::MultivariateNormal { mean: vec![1.0, 0.0], cov };
    let mut s = RandomStream::new(23);
    let draws: Vec<Vec<f64>> = (0..N).map(|_| draw_vector(&d, &mut s).unwrap()).collect();
    let a: Vec<f64> = draws.iter().map(|v| v[0]).collect();
    let b: Vec<f64> = draws.iter().map(|v| v[1]).collect();
    assert_moments(&a, 1.0, 2.0, "mvn x");
    assert_moments(&b, 0.0, 1.0, "mvn y");
    let rho = -0.6 / 2f64.sqrt();
    assert!((pearson(&a, &b) - rho).abs() < 4.0 * (1.0 - rho * rho) / (N as f64).sqrt());
}

#[test]
fn substreams_are_addressable_and_independent() {
    let root = RandomStream::new(99);
    let mut a = root.substream(3).substream(4);
    let mut b = RandomStream::new(99).substream(3).substream(4);
    let xa: Vec<f64> = (0..100).map(|_| a.uniform()).collect();
    let xb: Vec<f64> = (0..100).map(|_| b.uniform()).collect();
    assert_eq!(xa, xb);
    assert_eq!(root.substream(3).substream(4).path(), &[3, 4]);

    // advancing the parent does not move its children
    let mut parent = RandomStream::new(99);
    let before: f64 = parent.substream(1).uniform();
    for _ in 0..10 {
        parent.uniform();
    }
    assert_eq!(parent.substream(1).uniform(), before);

    let mut s1 = root.substream(0);
    let mut s2 = root.substream(1);
    let u1: Vec<f64> = (0..N).map(|_| s1.uniform()).collect();
    let u2: Vec<f64> = (0..N).map(|_| s2.uniform()).collect();
    assert!(pearson(&u1, &u2).abs() < 0.03);
    assert_ne!(RandomStream::new(5).uniform(), RandomStream::new(6).uniform());
}

#[test]
fn uniforms_stay_in_range() {
    let mut s = RandomStream::new(0);
    for _ in 0..N {
        let u = s.uniform_open();
        assert!(u > 0.0 && u < 1.0);
        assert!(s.index(7) < 7);
    }
}
