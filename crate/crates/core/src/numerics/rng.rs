use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::numerics::matrix::{DenseMatrix, DenseVector};

/// Seeded xoshiro256++ stream. The draw sequence depends only on the seed.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: Xoshiro256PlusPlus,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: Xoshiro256PlusPlus::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream, e.g. one per worker thread.
    pub fn fork(&self, index: u64) -> Self {
        // splitmix64 finalizer over (seed, index)
        let mut z = self.seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Self::new(z ^ (z >> 31))
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn normal(&mut self, std_dev: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.inner);
        std_dev * z
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize, std_dev: f64) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| self.normal(std_dev))
    }

    pub fn normal_vector(&mut self, len: usize, std_dev: f64) -> DenseVector {
        DenseVector::from_fn(len, |_| self.normal(std_dev))
    }

    /// `amount` distinct indices from `0..len`, in ascending order.
    pub fn distinct_indices(&mut self, len: usize, amount: usize) -> Vec<usize> {
        let mut idx = index::sample(&mut self.inner, len, amount).into_vec();
        idx.sort_unstable();
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a = RngStream::new(42).normal_matrix(5, 7, 1.0);
        let b = RngStream::new(42).normal_matrix(5, 7, 1.0);
        assert_eq!(a.as_slice(), b.as_slice());
        assert_ne!(a, RngStream::new(43).normal_matrix(5, 7, 1.0));
    }

    #[test]
    fn forks_differ_but_are_reproducible() {
        let root = RngStream::new(9);
        assert_eq!(root.fork(1).seed(), root.fork(1).seed());
        assert_ne!(root.fork(1).seed(), root.fork(2).seed());
    }

    #[test]
    fn distinct_indices_sorted_unique() {
        let mut rng = RngStream::new(1);
        let idx = rng.distinct_indices(50, 10);
        assert_eq!(idx.len(), 10);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert!(idx.iter().all(|&i| i < 50));
    }

    #[test]
    fn normal_moments() {
        let mut rng = RngStream::new(5);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.normal(0.1)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 2e-3);
        assert!((var - 0.01).abs() < 2e-4);
    }
}
