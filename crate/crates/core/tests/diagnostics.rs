use thinlab::diagnostics::{
    empirical_fold_stats, fisher_allocation, mismatch_moments, mismatch_sweep, splitting_information,
    FisherParameter, MismatchSpec, TrueLaw,
};
use thinlab::samplers::{binomial, draw, poisson, PrimitiveDist};
use thinlab::stats::mean_var;
use thinlab::{Error, RandomStream, ThinPlan, Thinner};

const N: usize = 100_000;

fn gaussian() -> TrueLaw {
    TrueLaw::Gaussian { mean: 7.0, var: 5.0 }
}

fn negbin() -> TrueLaw {
    TrueLaw::NegativeBinomial { size: 7.0, prob: 0.7 }
}

fn gamma() -> TrueLaw {
    TrueLaw::Gamma { shape: 7.0, rate: 5.0 }
}

fn grid(truth: f64) -> Vec<f64> {
    (0..50).map(|k| truth * (0.1 + 1.9 * k as f64 / 49.0)).collect()
}

#[test]
fn gaussian_covariance_example() {
    let m = mismatch_moments(&MismatchSpec::new(gaussian(), 3.0, 0.44).unwrap());
    assert!((m.cov - 0.4928).abs() < 1e-12);
    assert!(m.corr > 0.0);
    let m = mismatch_moments(&MismatchSpec::new(gaussian(), 5.0, 0.3).unwrap());
    assert_eq!(m.cov, 0.0);
    assert_eq!(m.corr, 0.0);
    let m = mismatch_moments(&MismatchSpec::new(gamma(), 7.0, 0.44).unwrap());
    assert!(m.cov.abs() < 1e-15);
}

/// Fold variances and covariance estimated directly from thinned draws.
fn simulated_moments(law: TrueLaw, assumed: f64, eps: f64, seed: u64) -> (f64, f64, f64) {
    let thinner = Thinner::new(&law.thinning_family(assumed), &ThinPlan::two_fold(eps).unwrap()).unwrap();
    let mut s = RandomStream::new(seed);
    let mut out = [0.0; 2];
    let (mut a, mut b) = (Vec::with_capacity(N), Vec::with_capacity(N));
    for _ in 0..N {
        let x = match law {
            TrueLaw::Gaussian { mean, var } => draw(&PrimitiveDist::Normal { mean, var }, &mut s),
            TrueLaw::NegativeBinomial { size, prob } => draw(&PrimitiveDist::NegativeBinomial { size, prob }, &mut s),
            TrueLaw::Gamma { shape, rate } => draw(&PrimitiveDist::Gamma { shape, rate }, &mut s),
        }
        .unwrap();
        thinner.thin_into(&[x], &mut s, &mut out).unwrap();
        a.push(out[0]);
        b.push(out[1]);
    }
    let (ma, va) = mean_var(&a);
    let (mb, vb) = mean_var(&b);
    let c = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (N as f64 - 1.0);
    (va, vb, c)
}

#[test]
fn analytic_moments_match_simulation() {
    for (k, (law, assumed)) in [(gaussian(), 2.0), (negbin(), 20.0), (negbin(), 2.0), (gamma(), 1.5), (gamma(), 14.0)]
        .into_iter()
        .enumerate()
    {
        let m = mismatch_moments(&MismatchSpec::new(law, assumed, 0.44).unwrap());
        let (v1, v2, c) = simulated_moments(law, assumed, 0.44, 40 + k as u64);
        // relative tolerances well above the Monte Carlo error at 1e5 draws
        assert!((v1 / m.var1 - 1.0).abs() < 0.04, "{law:?} var1 {v1} vs {}", m.var1);
        assert!((v2 / m.var2 - 1.0).abs() < 0.04, "{law:?} var2 {v2} vs {}", m.var2);
        assert!((c - m.cov).abs() < 4.0 * (v1 * v2 / N as f64).sqrt() + 0.02 * m.cov.abs(), "{law:?} cov {c} vs {}", m.cov);
    }
}

#[test]
fn covariance_signs() {
    // too little assumed noise leaves the folds positively correlated
    let e = 0.44;
    let sign = |law: TrueLaw, a: f64| mismatch_moments(&MismatchSpec::new(law, a, e).unwrap()).cov.signum();
    assert_eq!(sign(gaussian(), 3.0), 1.0);
    assert_eq!(sign(gaussian(), 8.0), -1.0);
    assert_eq!(sign(negbin(), 14.0), 1.0);
    assert_eq!(sign(negbin(), 3.0), -1.0);
    assert_eq!(sign(gamma(), 14.0), 1.0);
    assert_eq!(sign(gamma(), 3.0), -1.0);
}

#[test]
fn correctly_specified_nuisance_gives_uncorrelated_folds() {
    for (law, seed) in [(gaussian(), 1), (negbin(), 2), (gamma(), 3)] {
        let spec = MismatchSpec::new(law, law.true_nuisance(), 0.44).unwrap();
        let st = empirical_fold_stats(&spec, N, &RandomStream::new(seed)).unwrap();
        assert!(st.corr_hat.abs() < 0.01, "{law:?}: {}", st.corr_hat);
        let se = (law.variance() / N as f64).sqrt();
        assert!((st.mean1_hat - 0.44 * law.mean()).abs() < 4.0 * se);
        assert!((st.mean2_hat - 0.56 * law.mean()).abs() < 4.0 * se);
    }
}

#[test]
fn gamma_sweep_tracks_theory() {
    let rows = mismatch_sweep(gamma(), 0.44, &grid(7.0), N, &RandomStream::new(4)).unwrap();
    assert_eq!(rows.len(), 50);
    let worst = rows.iter().map(|r| (r.corr_hat - r.corr_theory).abs()).fold(0.0, f64::max);
    assert!(worst < 0.02, "max deviation {worst}");
}

#[test]
fn sweep_theory_is_zero_at_truth_and_decreasing_for_gaussian() {
    let mut g = grid(5.0);
    g.push(5.0);
    let rows = mismatch_sweep(gaussian(), 0.44, &g, 100, &RandomStream::new(5)).unwrap();
    assert_eq!(rows.last().unwrap().corr_theory, 0.0);
    assert!(rows[..50].windows(2).all(|w| w[1].corr_theory < w[0].corr_theory));
    assert!(matches!(mismatch_sweep(gaussian(), 0.44, &[], 100, &RandomStream::new(5)), Err(Error::Usage(_))));
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(MismatchSpec::new(gaussian(), 0.0, 0.5).is_err());
    assert!(MismatchSpec::new(gaussian(), 1.0, 1.0).is_err());
    assert!(MismatchSpec::new(TrueLaw::NegativeBinomial { size: 2.0, prob: 1.0 }, 1.0, 0.5).is_err());
    let spec = MismatchSpec::new(gaussian(), 5.0, 0.5).unwrap();
    assert!(empirical_fold_stats(&spec, 1, &RandomStream::new(0)).is_err());
}

#[test]
fn fisher_examples() {
    let plan = ThinPlan::new(vec![0.3, 0.7]).unwrap();
    let v = fisher_allocation(&FisherParameter::PoissonRate { rate: 2.0 }, &plan).unwrap();
    assert!((v[0] - 0.15).abs() < 1e-15 && (v[1] - 0.35).abs() < 1e-15);

    let v = fisher_allocation(&FisherParameter::BinomialProb { trials: 10, prob: 0.5 }, &ThinPlan::equal(2).unwrap())
        .unwrap();
    assert_eq!(v, vec![20.0, 20.0]);

    let scope = [
        FisherParameter::GaussianVariance { var: 2.0 },
        FisherParameter::BinomialTrials { trials: 10, prob: 0.5 },
        FisherParameter::NegativeBinomialSize { size: 3.0, prob: 0.5 },
        FisherParameter::GammaShape { shape: 2.0, rate: 1.0 },
    ];
    for p in &scope {
        assert!(matches!(fisher_allocation(p, &plan), Err(Error::Scope(_))), "{p:?}");
    }
    assert!(matches!(fisher_allocation(&FisherParameter::PoissonRate { rate: 0.0 }, &plan), Err(Error::Domain(_))));
}

#[test]
fn fisher_allocations_sum_to_total() {
    let plan = ThinPlan::new(vec![0.1, 0.25, 0.4, 0.25]).unwrap();
    for p in [
        FisherParameter::PoissonRate { rate: 3.3 },
        FisherParameter::BinomialProb { trials: 40, prob: 0.2 },
        FisherParameter::GaussianMean { var: 0.7 },
    ] {
        let total = p.information().unwrap();
        let sum: f64 = fisher_allocation(&p, &plan).unwrap().iter().sum();
        assert!((sum - total).abs() <= 4.0 * f64::EPSILON * total, "{p:?}");
    }
}

#[test]
fn fold_information_matches_score_variance() {
    // Poisson fold X¹ ~ Pois(ελ): score in λ is X¹/λ − ε
    let (lambda, e) = (2.0, 0.3);
    let mut s = RandomStream::new(6);
    let scores: Vec<f64> = (0..200_000).map(|_| poisson(e * lambda, &mut s) as f64 / lambda - e).collect();
    let want = fisher_allocation(&FisherParameter::PoissonRate { rate: lambda }, &ThinPlan::two_fold(e).unwrap()).unwrap()[0];
    assert!((mean_var(&scores).1 / want - 1.0).abs() < 0.02);

    // Binomial fold X¹ ~ Bin(εr, p): score in p is X¹/p − (εr − X¹)/(1 − p)
    let (r, p, e) = (20u64, 0.3, 0.25);
    let m = (e * r as f64) as u64;
    let scores: Vec<f64> = (0..200_000)
        .map(|_| {
            let x = binomial(m, p, &mut s) as f64;
            x / p - (m as f64 - x) / (1.0 - p)
        })
        .collect();
    let want = fisher_allocation(&FisherParameter::BinomialProb { trials: r, prob: p }, &ThinPlan::two_fold(e).unwrap())
        .unwrap()[0];
    assert!((mean_var(&scores).1 / want - 1.0).abs() < 0.02);
}

#[test]
fn gaussian_mean_information_by_numerical_differentiation() {
    // observed information −∂²/∂μ² log φ(x; εμ, εσ²) at any x, by central differences
    let (var, e, x) = (1.7, 0.4, 0.9);
    let ll = |mu: f64| -(x - e * mu).powi(2) / (2.0 * e * var);
    let h = 1e-3;
    let info = -(ll(1.0 + h) - 2.0 * ll(1.0) + ll(1.0 - h)) / (h * h);
    let want = fisher_allocation(&FisherParameter::GaussianMean { var }, &ThinPlan::two_fold(e).unwrap()).unwrap()[0];
    assert!((info - want).abs() < 1e-6);
}

#[test]
fn splitting_information_examples() {
    let iid = splitting_information(0.2, &[1.0; 10]).unwrap();
    assert_eq!(iid.train_dt, 2.0);
    assert_eq!(iid.sample_split.unwrap(), (2.0, 8.0));

    let lev = splitting_information(0.5, &[25.0, 1.0, 1.0, 1.0]).unwrap();
    assert_eq!(lev.train_dt, 14.0);
    assert_eq!(lev.test_dt, 14.0);
    assert_eq!(lev.sample_split.unwrap(), (26.0, 2.0));

    let odd = splitting_information(0.5, &[1.0; 5]).unwrap();
    assert!(matches!(odd.sample_split, Err(Error::Plan(_))));
    assert_eq!(odd.train_dt, 2.5);
    assert!(splitting_information(1.0, &[1.0; 4]).is_err());
}

#[test]
fn split_information_averages_to_thinning_information() {
    let infos = [0.3, 4.0, 1.2, 9.5, 0.05, 2.0];
    let mut total = 0.0;
    let mut count = 0;
    for mask in 0u32..64 {
        if mask.count_ones() != 3 {
            continue;
        }
        let mut order: Vec<f64> = (0..6).filter(|i| mask >> i & 1 == 1).map(|i| infos[i]).collect();
        order.extend((0..6).filter(|i| mask >> i & 1 == 0).map(|i| infos[i]));
        let si = splitting_information(0.5, &order).unwrap();
        total += si.sample_split.unwrap().0;
        count += 1;
    }
    assert_eq!(count, 20);
    let dt = splitting_information(0.5, &infos).unwrap().train_dt;
    assert!((total / count as f64 - dt).abs() < 1e-12);
}
