//! Deterministic data generators for unit tests.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub struct Gen(ChaCha8Rng);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| self.normal())
    }

    /// Positive, temporally smoothed columns (log-AR(1)).
    pub fn smooth_positive(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(rows, cols);
        for c in 0..cols {
            let mut s = 0.0;
            for r in 0..rows {
                s = 0.9 * s + 0.3 * self.normal();
                x[(r, c)] = s.exp();
            }
        }
        x
    }
}

/// `Y = X W + noise` with only the first `relevant` rows of `W` nonzero.
pub fn linear_data(
    g: &mut Gen,
    n: usize,
    d: usize,
    relevant: usize,
    noise: f64,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let x = g.normal_matrix(n, d);
    let w = DMatrix::from_fn(d, 2, |j, _| if j < relevant { g.normal() } else { 0.0 });
    let y = &x * &w + g.normal_matrix(n, 2) * noise;
    (x, y, w)
}
