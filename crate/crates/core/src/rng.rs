//! Seeded, splittable random streams for Monte Carlo.
//!
//! Stream `s` of seed `x` is ChaCha8 keyed by `x` with its 64-bit stream
//! counter set to `s`, so streams never overlap and any stream can be
//! regenerated without touching the others.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Splits `total` work items over `streams` streams; the first
/// `total % streams` streams take one extra item.
pub fn partition(total: u64, streams: u64) -> Vec<u64> {
    let streams = streams.max(1);
    let (base, rem) = (total / streams, total % streams);
    (0..streams).map(|s| base + u64::from(s < rem)).collect()
}

/// Running sums of a scalar statistic; merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(mut self, other: Moments) -> Moments {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Runs `work(rng, n_items)` once per stream (in parallel) and folds the
/// per-stream results in stream order, so the output depends only on
/// `(seed, streams)`.
pub fn run_streams<T, F>(seed: u64, total: u64, streams: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng, u64) -> T + Sync,
{
    partition(total, streams)
        .into_par_iter()
        .enumerate()
        .map(|(s, n)| work(&mut stream_rng(seed, s as u64), n))
        .collect()
}

pub fn standard_normal(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Haar-random unit vector: i.i.d. complex Gaussian entries, normalised.
pub fn haar_vector(rng: &mut StreamRng, dim: usize) -> Vec<Complex64> {
    loop {
        let mut v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(standard_normal(rng), standard_normal(rng)))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|z| *z /= norm);
            return v;
        }
    }
}

/// Haar-random orthonormal basis (columns of a Haar unitary), built by
/// Gram-Schmidt on complex Gaussian vectors.
pub fn haar_basis(rng: &mut StreamRng, dim: usize) -> Vec<Vec<Complex64>> {
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(standard_normal(rng), standard_normal(rng)))
            .collect();
        for b in &basis {
            let proj: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            v.iter_mut().zip(b).for_each(|(y, x)| *y -= proj * x);
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-10 {
            v.iter_mut().for_each(|z| *z /= norm);
            basis.push(v);
        }
    }
    basis
}
