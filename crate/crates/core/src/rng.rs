//! Seeded, hierarchically addressable random streams.
//!
//! A [`RandomStream`] is identified by a master seed and a path of indices.
//! The generator key is a hash of `(master_seed, path)`, so a child stream
//! never depends on how far its parent has been advanced and any subtree of
//! work can be replayed in isolation, in any order, on any thread.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_key(master_seed: u64, path: &[u64]) -> [u8; 32] {
    let mut h = splitmix(master_seed ^ 0x5EED_0F_DA7A_7111);
    for (depth, &idx) in path.iter().enumerate() {
        let tagged = splitmix(idx ^ (depth as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
        h = splitmix(h ^ tagged);
    }
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        let w = splitmix(h.wrapping_add((i as u64 + 1).wrapping_mul(GOLDEN)));
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    key
}

/// A reproducible random stream addressed by `(master_seed, path)`.
#[derive(Clone, Debug)]
pub struct RandomStream {
    master_seed: u64,
    path: Vec<u64>,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(master_seed: u64) -> Self {
        Self::at(master_seed, Vec::new())
    }

    fn at(master_seed: u64, path: Vec<u64>) -> Self {
        let rng = ChaCha8Rng::from_seed(derive_key(master_seed, &path));
        RandomStream { master_seed, path, rng }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Child stream whose path is this stream's path extended by `index`.
    ///
    /// The child depends only on the address, not on how many values have
    /// already been drawn from `self`.
    pub fn substream(&self, index: u64) -> RandomStream {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(index);
        RandomStream::at(self.master_seed, path)
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index range must be non-empty");
        // Lemire's multiply-shift with rejection
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.rng.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniforms(s: &mut RandomStream, n: usize) -> Vec<f64> {
        (0..n).map(|_| s.uniform()).collect()
    }

    #[test]
    fn same_address_same_sequence() {
        let s = RandomStream::new(42);
        let a = uniforms(&mut s.substream(0), 64);
        let b = uniforms(&mut s.substream(0), 64);
        assert_eq!(a, b);
    }

    #[test]
    fn child_ignores_parent_position() {
        let mut s = RandomStream::new(42);
        let before = uniforms(&mut s.substream(3), 8);
        let _ = uniforms(&mut s, 100);
        let after = uniforms(&mut s.substream(3), 8);
        assert_eq!(before, after);
    }

    #[test]
    fn nested_path_concatenates() {
        let s = RandomStream::new(1).substream(5);
        let c = s.substream(1).substream(2);
        assert_eq!(c.path(), &[5, 1, 2]);
        assert_eq!(c.master_seed(), 1);
    }

    #[test]
    fn path_length_matters() {
        let s = RandomStream::new(9);
        let a = uniforms(&mut s.substream(1), 4);
        let b = uniforms(&mut s.substream(1).substream(0), 4);
        assert_ne!(a, b);
    }

    #[test]
    fn sibling_streams_uncorrelated() {
        let s = RandomStream::new(2024);
        let a = uniforms(&mut s.substream(0), 10_000);
        let b = uniforms(&mut s.substream(1), 10_000);
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>();
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() < 0.03, "corr = {corr}");
    }

    #[test]
    fn index_in_range() {
        let mut s = RandomStream::new(3);
        let mut seen = [0usize; 7];
        for _ in 0..7000 {
            seen[s.index(7)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800 && c < 1200), "{seen:?}");
    }
}
