//! Lloyd's algorithm with k-means++ seeding and restarts.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;
use crate::rng::RandomStream;

pub const MAX_LLOYD_ITERS: usize = 100;
/// Candidates drawn per greedy k-means++ step.
pub const SEED_CANDIDATES: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansFit {
    /// Cluster label of each row, counted from 0.
    pub assignments: Vec<usize>,
    /// K × d
    pub centers: DMatrix<f64>,
    /// Within-cluster sum of squares.
    pub wcss: f64,
    pub converged: bool,
    /// Which restart produced this fit.
    pub restart: usize,
}

/// Best of `restarts` runs by within-cluster sum of squares. Restart `r`
/// draws its seeding from `stream.substream(r)`; ties keep the earliest.
pub fn kmeans(x: &DMatrix<f64>, k: usize, restarts: usize, stream: &RandomStream) -> Result<KMeansFit> {
    let n = x.nrows();
    if k == 0 || k > n {
        return Err(Error::Usage(format!("cannot form {k} clusters from {n} rows")));
    }
    if restarts == 0 {
        return Err(Error::Usage("need at least one k-means restart".into()));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("k-means input contains {v}")));
    }
    let data = Points::new(x);
    let fits: Vec<KMeansFit> = parallel::install(|| {
        (0..restarts)
            .into_par_iter()
            .map(|r| {
                let mut s = stream.substream(r as u64);
                let mut fit = lloyd(&data, seed_plus_plus(&data, k, &mut s), k);
                fit.restart = r;
                fit
            })
            .collect()
    });
    Ok(fits.into_iter().reduce(|best, f| if f.wcss < best.wcss { f } else { best }).expect("restarts > 0"))
}

/// Points with cached squared norms. Squared distances to a block of
/// centers come from one matrix product, ‖x‖² + ‖c‖² − 2 x·c.
struct Points<'a> {
    x: &'a DMatrix<f64>,
    sq: Vec<f64>,
    n: usize,
}

impl<'a> Points<'a> {
    fn new(x: &'a DMatrix<f64>) -> Self {
        let sq = x.row_iter().map(|r| r.norm_squared()).collect();
        Points { x, sq, n: x.nrows() }
    }

    /// n × m squared distances to the rows of `centers` (m × d).
    fn distances(&self, centers: &DMatrix<f64>) -> DMatrix<f64> {
        let csq: Vec<f64> = centers.row_iter().map(|r| r.norm_squared()).collect();
        let mut g = self.x * centers.transpose();
        for (c, mut col) in g.column_iter_mut().enumerate() {
            for (i, v) in col.iter_mut().enumerate() {
                *v = (self.sq[i] + csq[c] - 2.0 * *v).max(0.0);
            }
        }
        g
    }
}

fn sq_dist<'a>(a: impl Iterator<Item = &'a f64>, b: impl Iterator<Item = &'a f64>) -> f64 {
    a.zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Centers (K × d) chosen by greedy D² sampling: each step draws
/// `SEED_CANDIDATES` points and keeps the one that most lowers the potential.
fn seed_plus_plus(p: &Points, k: usize, s: &mut RandomStream) -> DMatrix<f64> {
    let mut picks = vec![s.index(p.n)];
    let mut dist: Vec<f64> = p.distances(&p.x.select_rows(&picks)).column(0).iter().copied().collect();
    for _ in 1..k {
        let total: f64 = dist.iter().sum();
        let cands: Vec<usize> = (0..SEED_CANDIDATES)
            .map(|_| if total > 0.0 { d2_sample(&dist, total, s) } else { s.index(p.n) })
            .collect();
        let dc = p.distances(&p.x.select_rows(&cands));
        let mut best = (f64::INFINITY, 0);
        for (q, col) in dc.column_iter().enumerate() {
            let pot: f64 = col.iter().zip(&dist).map(|(a, b)| a.min(*b)).sum();
            if pot < best.0 {
                best = (pot, q);
            }
        }
        for (di, v) in dist.iter_mut().zip(dc.column(best.1).iter()) {
            *di = di.min(*v);
        }
        picks.push(cands[best.1]);
    }
    p.x.select_rows(&picks)
}

fn d2_sample(dist: &[f64], total: f64, s: &mut RandomStream) -> usize {
    let target = s.uniform() * total;
    let mut acc = 0.0;
    for (i, &w) in dist.iter().enumerate() {
        acc += w;
        if acc > target && w > 0.0 {
            return i;
        }
    }
    // rounding can leave the target beyond the last partial sum
    dist.iter().rposition(|&w| w > 0.0).expect("total > 0")
}

fn lloyd(p: &Points, mut centers: DMatrix<f64>, k: usize) -> KMeansFit {
    let n = p.n;
    let mut assign = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut counts = vec![0usize; k];
    let mut converged = false;
    for _ in 0..MAX_LLOYD_ITERS {
        let dm = p.distances(&centers);
        let mut changed = false;
        for i in 0..n {
            let (mut best, mut bd) = (0, f64::INFINITY);
            for c in 0..k {
                if dm[(i, c)] < bd {
                    best = c;
                    bd = dm[(i, c)];
                }
            }
            dist[i] = bd;
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            converged = true;
            break;
        }
        counts.iter_mut().for_each(|c| *c = 0);
        for &a in &assign {
            counts[a] += 1;
        }
        // an empty cluster takes over the point farthest from its center
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[assign[i]] > 1)
                .fold(None, |b: Option<usize>, i| match b {
                    Some(j) if dist[j] >= dist[i] => Some(j),
                    _ => Some(i),
                });
            if let Some(i) = far {
                counts[assign[i]] -= 1;
                assign[i] = c;
                counts[c] = 1;
                dist[i] = 0.0;
            }
        }
        centers = means(p.x, &assign, &counts);
    }
    if converged {
        transfer_refine(p.x, &mut assign, &mut centers);
    }
    let wcss = (0..n).map(|i| sq_dist(p.x.row(i).iter(), centers.row(assign[i]).iter())).sum();
    KMeansFit { assignments: assign, centers, wcss, converged, restart: 0 }
}

/// Single-point transfers (Hartigan's rule): move x from cluster a to b when
/// n_b/(n_b+1)·‖x − c_b‖² < n_a/(n_a−1)·‖x − c_a‖², updating both means.
/// Each move strictly lowers the WCSS; stops after a pass without moves.
fn transfer_refine(x: &DMatrix<f64>, assign: &mut [usize], centers: &mut DMatrix<f64>) {
    let (n, d) = x.shape();
    let k = centers.nrows();
    let mut counts = vec![0usize; k];
    for &a in assign.iter() {
        counts[a] += 1;
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    let mut cs: Vec<Vec<f64>> = (0..k).map(|c| centers.row(c).iter().copied().collect()).collect();
    for _ in 0..MAX_LLOYD_ITERS {
        let mut moved = false;
        for (i, xi) in rows.iter().enumerate() {
            let a = assign[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let cost = na / (na - 1.0) * sq_dist(xi.iter(), cs[a].iter());
            let mut best = (cost, a);
            for (b, cb) in cs.iter().enumerate() {
                if b == a {
                    continue;
                }
                let nb = counts[b] as f64;
                let gain = nb / (nb + 1.0) * sq_dist(xi.iter(), cb.iter());
                if gain < best.0 {
                    best = (gain, b);
                }
            }
            let b = best.1;
            // relative margin keeps rounding from cycling a point back and forth
            if b == a || best.0 >= cost * (1.0 - 1e-12) {
                continue;
            }
            let nb = counts[b] as f64;
            for j in 0..d {
                cs[a][j] = (na * cs[a][j] - xi[j]) / (na - 1.0);
                cs[b][j] = (nb * cs[b][j] + xi[j]) / (nb + 1.0);
            }
            counts[a] -= 1;
            counts[b] += 1;
            assign[i] = b;
            moved = true;
        }
        if !moved {
            break;
        }
    }
    // exact means, free of the drift from incremental updates
    *centers = means(x, assign, &counts);
}

fn means(x: &DMatrix<f64>, assign: &[usize], counts: &[usize]) -> DMatrix<f64> {
    let k = counts.len();
    let mut c = DMatrix::zeros(k, x.ncols());
    for (j, col) in x.column_iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            c[(assign[i], j)] += v;
        }
    }
    for (r, &cnt) in counts.iter().enumerate() {
        if cnt > 0 {
            c.row_mut(r).scale_mut(1.0 / cnt as f64);
        }
    }
    c
}
