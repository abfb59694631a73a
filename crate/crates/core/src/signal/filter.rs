//! Zero-phase IIR low-pass filtering and decimation.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{bail, Result};

/// Order of the Butterworth anti-alias filter used by [`decimate`].
pub const ANTI_ALIAS_ORDER: usize = 8;

/// Anti-alias cutoff as a fraction of the output sampling rate.
pub const ANTI_ALIAS_CUTOFF: f64 = 0.4;

/// One second-order section in transposed direct form II, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Filter state that yields a steady output for a constant input `x`.
    fn steady_state(&self, x: f64) -> [f64; 2] {
        let gain = (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1]);
        let y = gain * x;
        let z2 = self.b[2] * x - self.a[1] * y;
        let z1 = self.b[1] * x - self.a[0] * y + z2;
        [z1, z2]
    }

    #[inline]
    fn step(&self, z: &mut [f64; 2], x: f64) -> f64 {
        let y = self.b[0] * x + z[0];
        z[0] = self.b[1] * x - self.a[0] * y + z[1];
        z[1] = self.b[2] * x - self.a[1] * y;
        y
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    sections: Vec<Biquad>,
}

impl SosFilter {
    /// Digital Butterworth low-pass of even `order` with cutoff `cutoff_hz` at
    /// sampling rate `fs`, designed by the prewarped bilinear transform.
    pub fn butterworth_lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Result<Self> {
        if order == 0 || !order.is_multiple_of(2) {
            bail!(InvalidConfig, "butterworth order must be even and positive, got {order}");
        }
        if !(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0) {
            bail!(InvalidConfig, "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz", fs / 2.0);
        }
        let k = libm::tan(PI * cutoff_hz / fs);
        let k2 = k * k;
        let sections = (0..order / 2)
            .map(|i| {
                let damping = libm::sin((2 * i + 1) as f64 * PI / (2 * order) as f64);
                let q_inv = 2.0 * damping;
                let norm = 1.0 / (1.0 + k * q_inv + k2);
                let b0 = k2 * norm;
                Biquad { b: [b0, 2.0 * b0, b0], a: [2.0 * (k2 - 1.0) * norm, (1.0 - k * q_inv + k2) * norm] }
            })
            .collect();
        Ok(Self { sections })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Causal filtering with each section started at steady state for `x[0]`.
    fn run_in_place(&self, x: &mut [f64]) {
        let Some(&first) = x.first() else { return };
        for section in &self.sections {
            let mut z = section.steady_state(first);
            for v in x.iter_mut() {
                *v = section.step(&mut z, *v);
            }
        }
    }

    /// Forward-backward filtering with odd-reflection padding at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let (head, tail) = (x[0], x[n - 1]);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * head - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * tail - x[n - 1 - i]));

        self.run_in_place(&mut ext);
        ext.reverse();
        self.run_in_place(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase decimation of a `C×T` recording by an integer `factor`.
///
/// Each channel is low-pass filtered forward and backward with an order-8
/// Butterworth at `0.4 · fs_in / factor`, then every `factor`-th sample is
/// kept, starting at sample 0. The output has `ceil(T / factor)` columns.
pub fn decimate(signal: &DMatrix<f64>, factor: usize, fs_in: f64) -> Result<DMatrix<f64>> {
    if factor == 0 {
        bail!(InvalidConfig, "decimation factor must be at least 1");
    }
    if signal.iter().any(|v| !v.is_finite()) {
        bail!(InvalidInput, "recording contains non-finite samples");
    }
    if factor == 1 {
        return Ok(signal.clone());
    }
    let cutoff = ANTI_ALIAS_CUTOFF * fs_in / factor as f64;
    let filter = SosFilter::butterworth_lowpass(ANTI_ALIAS_ORDER, cutoff, fs_in)?;
    let (channels, samples) = signal.shape();
    let out_len = samples.div_ceil(factor);
    let mut out = DMatrix::zeros(channels, out_len);
    let mut row = Vec::with_capacity(samples);
    for c in 0..channels {
        row.clear();
        row.extend(signal.row(c).iter().copied());
        let filtered = filter.filtfilt(&row);
        for (j, v) in filtered.iter().step_by(factor).enumerate() {
            out[(c, j)] = *v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(fs: f64, hz: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * hz * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn butterworth_has_unit_dc_gain() {
        let f = SosFilter::butterworth_lowpass(8, 100.0, 1000.0).unwrap();
        for s in f.sections() {
            let g = (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[0] + s.a[1]);
            assert!((g - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_design() {
        assert!(SosFilter::butterworth_lowpass(3, 100.0, 1000.0).is_err());
        assert!(SosFilter::butterworth_lowpass(8, 600.0, 1000.0).is_err());
    }

    #[test]
    fn identity_factor() {
        let x = DMatrix::from_fn(3, 17, |c, t| (c * 31 + t) as f64 * 0.37);
        assert_eq!(decimate(&x, 1, 1000.0).unwrap(), x);
    }

    #[test]
    fn zero_factor_is_config_error() {
        let x = DMatrix::zeros(1, 10);
        assert!(matches!(decimate(&x, 0, 1000.0), Err(crate::Error::InvalidConfig(_))));
    }

    #[test]
    fn non_finite_is_input_error() {
        let mut x = DMatrix::zeros(2, 10);
        x[(1, 3)] = f64::NAN;
        assert!(matches!(decimate(&x, 4, 1000.0), Err(crate::Error::InvalidInput(_))));
    }

    #[test]
    fn dc_is_preserved() {
        let x = DMatrix::from_element(2, 1001, 3.25);
        let y = decimate(&x, 4, 1000.0).unwrap();
        assert_eq!(y.ncols(), 251);
        assert!(y.iter().all(|v| (v - 3.25).abs() < 1e-9));
    }

    #[test]
    fn ten_hz_passes_with_amplitude_within_one_percent() {
        let src = sine(1000.0, 10.0, 4000);
        let x = DMatrix::from_row_slice(1, src.len(), &src);
        let y = decimate(&x, 4, 1000.0).unwrap();
        let expected = sine(250.0, 10.0, 1000);
        assert_eq!(y.ncols(), 1000);
        // interior, away from edge effects
        for j in 50..950 {
            assert!((y[(0, j)] - expected[j]).abs() < 0.01, "sample {j}");
        }
    }

    #[test]
    fn aliasing_tone_is_suppressed() {
        // 200 Hz would fold to 50 Hz after decimation to 250 Hz
        let src = sine(1000.0, 200.0, 4000);
        let x = DMatrix::from_row_slice(1, src.len(), &src);
        let y = decimate(&x, 4, 1000.0).unwrap();
        let peak = (50..950).map(|j| y[(0, j)].abs()).fold(0.0, f64::max);
        assert!(peak < 0.01, "residual {peak}");
    }
}
