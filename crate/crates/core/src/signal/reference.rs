//! Common average referencing and exponential moving standardization.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// Subtracts the cross-channel mean from every sample of a `C×L` block.
pub fn car(window: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = window.clone();
    car_in_place(&mut out)?;
    Ok(out)
}

pub fn car_in_place(window: &mut DMatrix<f64>) -> Result<()> {
    let channels = window.nrows();
    if channels < 2 {
        bail!(InvalidConfig, "common average reference needs at least 2 channels, got {channels}");
    }
    for mut col in window.column_iter_mut() {
        let mean = col.sum() / channels as f64;
        col.add_scalar_mut(-mean);
    }
    Ok(())
}

/// Smoothing and stabilizer constants for [`ExpStandardizer`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmsConfig {
    pub alpha: f64,
    pub eps: f64,
    /// Variance installed on the first sample.
    pub init_var: f64,
}

impl Default for EmsConfig {
    fn default() -> Self {
        Self { alpha: 0.001, eps: 1e-8, init_var: 1.0 }
    }
}

/// Per-channel streaming z-scoring with exponentially weighted moments.
///
/// The first sample seeds the mean (and `init_var` seeds the variance);
/// every sample, including the first, then runs the mean update followed
/// by the variance update around the new mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpStandardizer {
    config: EmsConfig,
    mean: Vec<f64>,
    var: Vec<f64>,
    primed: bool,
}

impl ExpStandardizer {
    pub fn new(channels: usize, config: EmsConfig) -> Result<Self> {
        if !(config.alpha > 0.0 && config.alpha <= 1.0) {
            bail!(InvalidConfig, "smoothing factor {} must lie in (0, 1]", config.alpha);
        }
        if !(config.eps > 0.0) || !(config.init_var >= 0.0) {
            bail!(InvalidConfig, "eps must be positive and init_var non-negative");
        }
        Ok(Self { config, mean: vec![0.0; channels], var: vec![0.0; channels], primed: false })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    /// Standardizes one multichannel sample, updating the moments in place.
    /// On error the state is left untouched.
    pub fn standardize(&mut self, sample: &[f64], out: &mut [f64]) -> Result<()> {
        if sample.len() != self.channels() || out.len() != self.channels() {
            bail!(InvalidInput, "expected {} channels, got {}", self.channels(), sample.len());
        }
        if sample.iter().any(|v| !v.is_finite()) {
            bail!(InvalidInput, "non-finite sample");
        }
        if !self.primed {
            self.mean.copy_from_slice(sample);
            self.var.iter_mut().for_each(|v| *v = self.config.init_var);
            self.primed = true;
        }
        let a = self.config.alpha;
        for c in 0..sample.len() {
            let x = sample[c];
            let m = (1.0 - a) * self.mean[c] + a * x;
            let d = x - m;
            let v = (1.0 - a) * self.var[c] + a * d * d;
            self.mean[c] = m;
            self.var[c] = v;
            out[c] = d / libm::sqrt(v + self.config.eps);
        }
        Ok(())
    }

    /// Standardizes a whole `C×T` recording column by column.
    pub fn standardize_all(&mut self, signal: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(signal.nrows(), signal.ncols());
        let mut sample = vec![0.0; signal.nrows()];
        let mut z = vec![0.0; signal.nrows()];
        for t in 0..signal.ncols() {
            sample.iter_mut().zip(signal.column(t).iter()).for_each(|(d, s)| *d = *s);
            self.standardize(&sample, &mut z)?;
            out.column_mut(t).iter_mut().zip(&z).for_each(|(d, s)| *d = *s);
        }
        Ok(out)
    }
}
