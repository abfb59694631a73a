//! Closed-form ridge baseline on standardized bandpower.
//!
//! Features are z-scored with population moments (`σ = sqrt(var + 1e-6)`),
//! a bias column of ones is appended and `W = (XbᵀXb + λI)⁻¹ XbᵀY` is solved
//! by LU. The bias row is penalized along with the feature rows.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{bail, Error, Result};
use crate::snapshot::{Snapshot, SnapshotValue};

/// Variance stabilizer inside the feature scale.
pub const SCALE_EPS: f64 = 1e-6;
pub const DEFAULT_LAMBDA: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `(D+1)×2`, bias in the last row.
    weights: DMatrix<f64>,
    lambda: f64,
}

/// Standardizes `x` with the given moments and appends a bias column.
pub fn augmented_design(x: &DMatrix<f64>, mean: &[f64], scale: &[f64]) -> DMatrix<f64> {
    let d = x.ncols();
    DMatrix::from_fn(x.nrows(), d + 1, |i, j| if j == d { 1.0 } else { (x[(i, j)] - mean[j]) / scale[j] })
}

/// Per-column population mean and `sqrt(var + ε)`.
pub fn moments(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let mean: Vec<f64> = x.column_iter().map(|c| c.sum() / n).collect();
    let scale = x
        .column_iter()
        .zip(&mean)
        .map(|(c, m)| libm::sqrt(c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n + SCALE_EPS))
        .collect();
    (mean, scale)
}

pub fn fit_ridge(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<RidgeModel> {
    if x.nrows() == 0 {
        bail!(InsufficientData, "ridge fit needs at least one row");
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        bail!(InvalidConfig, "ridge lambda must be positive, got {lambda}");
    }
    if y.nrows() != x.nrows() || y.ncols() != 2 {
        bail!(InvalidInput, "targets must be {}×2", x.nrows());
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        bail!(InvalidInput, "non-finite values in ridge inputs");
    }
    let (mean, scale) = moments(x);
    let xb = augmented_design(x, &mean, &scale);
    let mut gram = xb.tr_mul(&xb);
    for j in 0..gram.nrows() {
        gram[(j, j)] += lambda;
    }
    let rhs = xb.tr_mul(y);
    let weights =
        gram.lu().solve(&rhs).ok_or_else(|| Error::Numerical("ridge normal equations are singular".into()))?;
    Ok(RidgeModel { mean, scale, weights, lambda })
}

impl RidgeModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn predict(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.dim() {
            bail!(InvalidInput, "feature vector has {} entries, expected {}", x.len(), self.dim());
        }
        let d = self.dim();
        let mut out = [self.weights[(d, 0)], self.weights[(d, 1)]];
        for (j, &v) in x.iter().enumerate() {
            let z = (v - self.mean[j]) / self.scale[j];
            out[0] += z * self.weights[(j, 0)];
            out[1] += z * self.weights[(j, 1)];
        }
        Ok(out)
    }

    pub fn predict_batch(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            bail!(InvalidInput, "design has {} features, expected {}", x.ncols(), self.dim());
        }
        Ok(augmented_design(x, &self.mean, &self.scale) * &self.weights)
    }

    pub fn to_snapshot(&self) -> Snapshot {
        let mut s = Snapshot::new("ridge");
        s.insert("weights", SnapshotValue::matrix(&self.weights));
        s.insert("mean", SnapshotValue::Vector(self.mean.clone()));
        s.insert("scale", SnapshotValue::Vector(self.scale.clone()));
        s.insert("lambda", SnapshotValue::Scalar(self.lambda));
        s
    }

    pub fn from_snapshot(s: &Snapshot) -> Result<Self> {
        s.expect_kind("ridge")?;
        let weights = s.matrix("weights")?;
        let mean = s.vector("mean")?.to_vec();
        let scale = s.vector("scale")?.to_vec();
        if scale.len() != mean.len() || weights.shape() != (mean.len() + 1, 2) {
            bail!(InvalidInput, "ridge snapshot has inconsistent shapes");
        }
        if scale.iter().any(|v| !(*v > 0.0)) {
            bail!(InvalidInput, "ridge scales must be positive");
        }
        Ok(Self { mean, scale, weights, lambda: s.scalar("lambda")? })
    }
}
