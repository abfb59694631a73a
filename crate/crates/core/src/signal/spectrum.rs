//! Welch power spectral density and band integration.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};

/// Shortest window accepted by the Welch estimator.
pub const MIN_WINDOW: usize = 8;

/// Longest Welch segment; windows longer than this are split.
pub const MAX_SEGMENT: usize = 256;

/// A named frequency band `[lo, hi]` in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl BandSpec {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), lo, hi }
    }

    pub fn theta() -> Self {
        Self::new("theta", 4.0, 7.0)
    }

    pub fn alpha() -> Self {
        Self::new("alpha", 8.0, 13.0)
    }

    pub fn beta() -> Self {
        Self::new("beta", 13.0, 30.0)
    }

    /// Theta, alpha and beta.
    pub fn defaults() -> Vec<Self> {
        alloc::vec![Self::theta(), Self::alpha(), Self::beta()]
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        let ok = self.lo.is_finite() && self.hi.is_finite() && self.lo > 0.0 && self.lo < self.hi;
        if !ok || self.hi > fs / 2.0 {
            bail!(
                InvalidConfig,
                "band {} [{}, {}] Hz must satisfy 0 < lo < hi <= {} Hz",
                self.name,
                self.lo,
                self.hi,
                fs / 2.0
            );
        }
        Ok(())
    }
}

/// One-sided spectral density on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub density: Vec<f64>,
}

impl Psd {
    pub fn bin_width(&self) -> f64 {
        if self.freqs.len() < 2 {
            0.0
        } else {
            self.freqs[1] - self.freqs[0]
        }
    }

    /// Riemann sum of the density over all bins.
    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }
}

/// Precomputed Welch estimator for a fixed segment length.
///
/// Segments use a periodic Hann taper, mean detrending and density scaling
/// (`|X_k|² / (fs · Σw²)`), doubled on every bin except DC and Nyquist.
#[derive(Debug, Clone)]
pub struct Welch {
    fs: f64,
    nperseg: usize,
    step: usize,
    taper: Vec<f64>,
    scale: f64,
    // row-major (bins × nperseg)
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Welch {
    pub fn new(fs: f64, nperseg: usize, overlap_frac: f64) -> Result<Self> {
        if nperseg < MIN_WINDOW {
            return Err(Error::WindowTooShort { len: nperseg, min: MIN_WINDOW });
        }
        if !(0.0..1.0).contains(&overlap_frac) {
            bail!(InvalidConfig, "overlap fraction {overlap_frac} must lie in [0, 1)");
        }
        if !(fs > 0.0) {
            bail!(InvalidConfig, "sampling rate must be positive");
        }
        let noverlap = libm::floor(nperseg as f64 * overlap_frac) as usize;
        let step = nperseg - noverlap;
        let taper: Vec<f64> =
            (0..nperseg).map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / nperseg as f64)).collect();
        let power: f64 = taper.iter().map(|w| w * w).sum();
        let bins = nperseg / 2 + 1;
        let mut cos = Vec::with_capacity(bins * nperseg);
        let mut sin = Vec::with_capacity(bins * nperseg);
        for k in 0..bins {
            for i in 0..nperseg {
                // reduce the phase index first so large k·i stays exact
                let phase = 2.0 * PI * ((k * i) % nperseg) as f64 / nperseg as f64;
                cos.push(libm::cos(phase));
                sin.push(libm::sin(phase));
            }
        }
        Ok(Self { fs, nperseg, step, taper, scale: 1.0 / (fs * power), cos, sin })
    }

    /// Estimator matching the packet pipeline: `nperseg = min(len, 256)`, 50% overlap.
    pub fn for_window(fs: f64, len: usize) -> Result<Self> {
        if len < MIN_WINDOW {
            return Err(Error::WindowTooShort { len, min: MIN_WINDOW });
        }
        Self::new(fs, len.min(MAX_SEGMENT), 0.5)
    }

    pub fn nperseg(&self) -> usize {
        self.nperseg
    }

    pub fn bins(&self) -> usize {
        self.nperseg / 2 + 1
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.bins()).map(|k| k as f64 * self.fs / self.nperseg as f64).collect()
    }

    /// Writes the averaged density of `x` into `out` (length [`Self::bins`]).
    pub fn estimate_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.nperseg;
        if x.len() < n {
            return Err(Error::WindowTooShort { len: x.len(), min: n });
        }
        debug_assert_eq!(out.len(), self.bins());
        out.iter_mut().for_each(|v| *v = 0.0);
        let segments = (x.len() - n) / self.step + 1;
        let mut seg = alloc::vec![0.0; n];
        for s in 0..segments {
            let chunk = &x[s * self.step..s * self.step + n];
            let mean = chunk.iter().sum::<f64>() / n as f64;
            for ((dst, &v), &w) in seg.iter_mut().zip(chunk).zip(&self.taper) {
                *dst = (v - mean) * w;
            }
            for (k, acc) in out.iter_mut().enumerate() {
                let row = k * n;
                let (mut re, mut im) = (0.0, 0.0);
                for (i, &v) in seg.iter().enumerate() {
                    re += v * self.cos[row + i];
                    im -= v * self.sin[row + i];
                }
                *acc += re * re + im * im;
            }
        }
        let nyquist = if n.is_multiple_of(2) { Some(n / 2) } else { None };
        let norm = self.scale / segments as f64;
        for (k, v) in out.iter_mut().enumerate() {
            let one_sided = if k == 0 || Some(k) == nyquist { 1.0 } else { 2.0 };
            *v *= norm * one_sided;
        }
        Ok(())
    }

    pub fn estimate(&self, x: &[f64]) -> Result<Psd> {
        let mut density = alloc::vec![0.0; self.bins()];
        self.estimate_into(x, &mut density)?;
        Ok(Psd { freqs: self.freqs(), density })
    }
}

/// Welch PSD of one window.
pub fn welch_psd(window: &[f64], fs: f64, nperseg: usize, overlap_frac: f64) -> Result<Psd> {
    if window.len() < MIN_WINDOW {
        return Err(Error::WindowTooShort { len: window.len(), min: MIN_WINDOW });
    }
    if window.iter().any(|v| !v.is_finite()) {
        bail!(InvalidInput, "window contains non-finite samples");
    }
    Welch::new(fs, nperseg, overlap_frac)?.estimate(window)
}

/// Integral of the piecewise-linear interpolant of `density` over `[lo, hi]`.
///
/// Parts of the band beyond the last bin contribute nothing.
pub fn integrate_band(freqs: &[f64], density: &[f64], lo: f64, hi: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..freqs.len().saturating_sub(1) {
        let (f0, f1) = (freqs[i], freqs[i + 1]);
        let a = lo.max(f0);
        let b = hi.min(f1);
        if b <= a {
            continue;
        }
        let slope = (density[i + 1] - density[i]) / (f1 - f0);
        let va = density[i] + slope * (a - f0);
        let vb = density[i] + slope * (b - f0);
        total += 0.5 * (b - a) * (va + vb);
    }
    total
}

/// Band powers for each band, from a single PSD.
pub fn bandpower(psd: &Psd, bands: &[BandSpec], fs: f64) -> Result<Vec<f64>> {
    bands.iter().try_for_each(|b| b.validate(fs))?;
    Ok(bands.iter().map(|b| integrate_band(&psd.freqs, &psd.density, b.lo, b.hi).max(0.0)).collect())
}
