use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::samplers::{binomial, standard_gamma, standard_normal};
use crate::special::expit;

/// n × k matrix with orthonormal columns: QR of a Gaussian matrix with the
/// signs of R's diagonal moved into Q.
pub fn random_orthogonal(n: usize, k: usize, stream: &mut RandomStream) -> Result<DMatrix<f64>> {
    if k == 0 || k > n {
        return Err(Error::Usage(format!("cannot draw {k} orthonormal columns in dimension {n}")));
    }
    let g = DMatrix::from_fn(n, k, |_, _| standard_normal(stream));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinomialPcaConfig {
    pub n: usize,
    pub d: usize,
    pub trials: u64,
    /// Diagonal of D in θ = U D Vᵀ; its length is the true rank.
    pub singular_values: Vec<f64>,
}

impl Default for BinomialPcaConfig {
    fn default() -> Self {
        BinomialPcaConfig { n: 250, d: 100, trials: 100, singular_values: (5..=14).map(f64::from).collect() }
    }
}

impl BinomialPcaConfig {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinomialPcaData {
    pub x: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub theta: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

/// U from `substream(0)`, V from `substream(1)`, counts from `substream(2)`.
pub fn gen_binomial_pca_data(cfg: &BinomialPcaConfig, stream: &RandomStream) -> Result<BinomialPcaData> {
    let k = cfg.rank();
    if k == 0 || k > cfg.n.min(cfg.d) {
        return Err(Error::Usage(format!("rank {k} outside 1..={}", cfg.n.min(cfg.d))));
    }
    let u = random_orthogonal(cfg.n, k, &mut stream.substream(0))?;
    let v = random_orthogonal(cfg.d, k, &mut stream.substream(1))?;
    let mut ud = u.clone();
    for (j, s) in cfg.singular_values.iter().enumerate() {
        ud.column_mut(j).scale_mut(*s);
    }
    let theta = ud * v.transpose();
    let p = theta.map(expit);
    let mut s = stream.substream(2);
    let x = p.map(|pij| binomial(cfg.trials, pij, &mut s) as f64);
    Ok(BinomialPcaData { x, p, theta, u, v })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaTask {
    /// d = 2, K* = 4, shape 20.
    Small,
    /// d = 100, K* = 10, shape 2.
    Large,
}

impl GammaTask {
    pub fn shape(&self) -> f64 {
        match self {
            GammaTask::Small => 20.0,
            GammaTask::Large => 2.0,
        }
    }

    pub fn true_k(&self) -> usize {
        match self {
            GammaTask::Small => 4,
            GammaTask::Large => 10,
        }
    }

    /// K* × d rate matrix.
    pub fn rates(&self) -> DMatrix<f64> {
        match self {
            GammaTask::Small => DMatrix::from_row_slice(4, 2, &[0.5, 5.0, 5.0, 0.5, 10.0, 10.0, 0.5, 0.5]),
            // 1-based: 0.1 when k ≤ 9 and 10k − 9 ≤ j ≤ 10k + 10
            GammaTask::Large => DMatrix::from_fn(10, 100, |k, j| {
                let (k, j) = (k + 1, j + 1);
                if k <= 9 && 10 * k - 9 <= j && j <= 10 * k + 10 {
                    0.1
                } else {
                    1.0
                }
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaData {
    pub x: DMatrix<f64>,
    /// True cluster of each row, counted from 0; rows come in blocks of 100.
    pub labels: Vec<usize>,
    pub shape: f64,
    pub rates: DMatrix<f64>,
}

pub const ROWS_PER_CLUSTER: usize = 100;

/// 100 rows per cluster with X_ij ~ Gamma(λ, θ_{c_i, j}).
pub fn gen_gamma_clusters(task: GammaTask, stream: &RandomStream) -> GammaData {
    let rates = task.rates();
    let shape = task.shape();
    let (k, d) = rates.shape();
    let labels: Vec<usize> = (0..k * ROWS_PER_CLUSTER).map(|i| i / ROWS_PER_CLUSTER).collect();
    let mut s = stream.clone();
    let mut x = DMatrix::zeros(labels.len(), d);
    for (i, &c) in labels.iter().enumerate() {
        for j in 0..d {
            x[(i, j)] = standard_gamma(shape, &mut s) / rates[(c, j)];
        }
    }
    GammaData { x, labels, shape, rates }
}
