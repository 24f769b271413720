use crate::error::{Error, Result};
use crate::linalg::RngState;

/// Endless one-pass stream of i.i.d. `N(0, I_d)` vectors.
#[derive(Clone, Debug)]
pub struct GaussianStream {
    dim: usize,
    rng: RngState,
}

pub fn gaussian_stream(d: usize, rng: RngState) -> Result<GaussianStream> {
    if d == 0 {
        return Err(Error::validation("gaussian_stream needs d >= 1"));
    }
    Ok(GaussianStream { dim: d, rng })
}

impl GaussianStream {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes the next sample into `out` (length `d`) without allocating.
    pub fn next_into(&mut self, out: &mut [f64]) {
        assert_eq!(out.len(), self.dim);
        self.rng.fill_normal(out);
    }
}

impl Iterator for GaussianStream {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let mut v = vec![0.0; self.dim];
        self.next_into(&mut v);
        Some(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_and_fresh() {
        let mut a = gaussian_stream(5, RngState::new(4)).unwrap();
        let mut b = gaussian_stream(5, RngState::new(4)).unwrap();
        let first = a.next().unwrap();
        assert_eq!(first, b.next().unwrap());
        assert_ne!(first, a.next().unwrap());
        assert!(gaussian_stream(0, RngState::new(0)).is_err());
    }

    #[test]
    fn unit_variance_per_coordinate() {
        let d = 3;
        let n = 100_000;
        let mut s = gaussian_stream(d, RngState::new(12)).unwrap();
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        for _ in 0..n {
            let x = s.next().unwrap();
            for k in 0..d {
                sum[k] += x[k];
                sq[k] += x[k] * x[k];
            }
        }
        for k in 0..d {
            let mean = sum[k] / n as f64;
            let var = sq[k] / n as f64 - mean * mean;
            assert!((var - 1.0).abs() < 0.02, "{var}");
        }
    }
}
