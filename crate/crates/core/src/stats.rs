//! Small descriptive-statistics helpers shared by diagnostics and tests.

/// Sample mean and unbiased sample variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Unbiased sample covariance.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0)
}

/// Pearson correlation. Returns 0 when either input is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let (_, vx) = mean_var(xs);
    let (_, vy) = mean_var(ys);
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    covariance(xs, ys) / (vx * vy).sqrt()
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and a
/// continuous `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("NaN in KS sample"));
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs())
    })
}

/// Kolmogorov–Smirnov distance for integer-valued samples against an
/// integer-supported `cdf`, evaluated at every integer between the smallest
/// and largest sample (and one below the smallest).
pub fn ks_distance_discrete(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("NaN in KS sample"));
    let n = xs.len() as f64;
    let (lo, hi) = (xs[0] as i64, xs[xs.len() - 1] as i64);
    let mut d = cdf((lo - 1) as f64).abs();
    let mut idx = 0;
    for k in lo..=hi {
        while idx < xs.len() && xs[idx] as i64 <= k {
            idx += 1;
        }
        d = d.max((idx as f64 / n - cdf(k as f64)).abs());
    }
    d
}

/// Total-variation distance between an empirical pmf over non-negative
/// integers and a model pmf, evaluated on `0..=max_k`.
pub fn tv_distance_counts(samples: &[f64], pmf: impl Fn(u64) -> f64, max_k: u64) -> f64 {
    let n = samples.len() as f64;
    let mut counts = vec![0usize; max_k as usize + 2];
    for &s in samples {
        let k = (s as u64).min(max_k + 1) as usize;
        counts[k] += 1;
    }
    let mut tv = 0.0;
    let mut model_mass = 0.0;
    for k in 0..=max_k {
        let p = pmf(k);
        model_mass += p;
        tv += (counts[k as usize] as f64 / n - p).abs();
    }
    tv += (counts[max_k as usize + 1] as f64 / n - (1.0 - model_mass).max(0.0)).abs();
    tv / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_var_basic() {
        let (m, v) = mean_var(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_perfect() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [2.0, 4.0, 6.0];
        assert!((pearson(&xs, &ys) - 1.0).abs() < 1e-15);
        assert_eq!(pearson(&xs, &[1.0, 1.0, 1.0]), 0.0);
    }

    #[test]
    fn ks_of_uniform_grid() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12, "{d}");
    }

    #[test]
    fn ks_of_exact_discrete_sample() {
        // Bernoulli(0.5) with exactly half ones: ECDF matches the model CDF
        let xs: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let cdf = |x: f64| if x < 0.0 { 0.0 } else if x < 1.0 { 0.5 } else { 1.0 };
        assert!(ks_distance_discrete(&xs, cdf) < 1e-12);
        let shifted = |x: f64| if x < 0.0 { 0.0 } else if x < 1.0 { 0.8 } else { 1.0 };
        assert!((ks_distance_discrete(&xs, shifted) - 0.3).abs() < 1e-12);
    }
}
