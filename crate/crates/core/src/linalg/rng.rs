//! Seeded random sampling.
//!
//! The generator is ChaCha8 (`rand_chacha`), whose output stream for a given
//! seed and stream id is fixed by its reference definition, so runs are
//! reproducible across platforms and releases. Normal variates use the
//! Box–Muller transform; the second variate of each pair is cached.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// An independent generator for sub-task `stream` of the same master seed.
    ///
    /// Stream 0 of `split` is distinct from the master generator itself
    /// (which also runs on ChaCha stream 0 but keyed by `seed` alone): derived
    /// streams are keyed by `seed` and select ChaCha stream `stream + 1`.
    pub fn split(&self, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream.wrapping_add(1));
        RngState {
            seed: self.seed,
            inner,
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (rejection sampling, unbiased).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] keeps ln finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.normal();
        }
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }

    /// A uniformly random subset of `0..n` of size `k`, in random order.
    pub fn subset(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut idx = self.permutation(n);
        idx.truncate(k.min(n));
        idx
    }
}

/// Matrix of i.i.d. standard normal entries, filled row by row.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut RngState) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::validation(format!(
            "gaussian_matrix needs positive dimensions, got {rows}x{cols}"
        )));
    }
    let mut data = vec![0.0; rows * cols];
    rng.fill_normal(&mut data);
    Matrix::from_vec(rows, cols, data)
}
