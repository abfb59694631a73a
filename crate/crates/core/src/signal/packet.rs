//! Sliding-window packetization and per-packet feature streams.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DMatrixView};
use serde::{Deserialize, Serialize};

use super::reference::{car, EmsConfig, ExpStandardizer};
use super::spectrum::{BandSpec, Welch};
use crate::error::{bail, Error, Result};

/// Sampling and windowing parameters of the packet stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketizerConfig {
    /// Acquisition rate in Hz.
    pub fs_in: f64,
    /// Rate after decimation in Hz.
    pub fs: f64,
    /// Control update rate in Hz.
    pub fp: f64,
    pub window_sec: f64,
    pub step_sec: f64,
}

impl Default for PacketizerConfig {
    fn default() -> Self {
        Self { fs_in: 1000.0, fs: 250.0, fp: 25.0, window_sec: 0.25, step_sec: 0.04 }
    }
}

impl PacketizerConfig {
    /// Window length `L` in samples, rounded half away from zero.
    pub fn window_len(&self) -> usize {
        libm::round(self.window_sec * self.fs) as usize
    }

    /// Hop `H` in samples.
    pub fn hop(&self) -> usize {
        libm::round(self.step_sec * self.fs) as usize
    }

    pub fn dt(&self) -> f64 {
        self.step_sec
    }

    /// Integer ratio `fs_in / fs`.
    pub fn decimation_factor(&self) -> Result<usize> {
        let ratio = self.fs_in / self.fs;
        let factor = libm::round(ratio);
        if !(factor >= 1.0) || libm::fabs(ratio - factor) > 1e-9 {
            bail!(InvalidConfig, "fs_in {} Hz is not an integer multiple of fs {} Hz", self.fs_in, self.fs);
        }
        Ok(factor as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.fs_in, self.fs, self.fp, self.window_sec, self.step_sec];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            bail!(InvalidConfig, "sampling rates and window durations must be positive");
        }
        if self.window_len() == 0 || self.hop() == 0 {
            bail!(InvalidConfig, "window and hop must cover at least one sample");
        }
        self.decimation_factor().map(|_| ())
    }
}

/// Window start positions and timestamps for a recording of given length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketGrid {
    pub len: usize,
    pub hop: usize,
    pub count: usize,
}

impl PacketGrid {
    pub fn start(&self, k: usize) -> usize {
        k * self.hop
    }

    /// Right-edge timestamp of window `k` in seconds.
    pub fn timestamp(&self, k: usize, fs: f64) -> f64 {
        (k * self.hop + self.len) as f64 / fs
    }

    pub fn timestamps(&self, fs: f64) -> Vec<f64> {
        (0..self.count).map(|k| self.timestamp(k, fs)).collect()
    }

    /// `C×L` views of each window over `signal`.
    pub fn windows<'a>(&'a self, signal: &'a DMatrix<f64>) -> impl Iterator<Item = DMatrixView<'a, f64>> + 'a {
        (0..self.count).map(move |k| signal.columns(self.start(k), self.len))
    }
}

/// Window grid for `samples` samples at the configured window and hop.
pub fn packet_grid(samples: usize, cfg: &PacketizerConfig) -> Result<PacketGrid> {
    cfg.validate()?;
    let (len, hop) = (cfg.window_len(), cfg.hop());
    if samples < len {
        return Err(Error::EmptyStream(format!(
            "recording has {samples} samples, shorter than one {len}-sample window"
        )));
    }
    Ok(PacketGrid { len, hop, count: (samples - len) / hop + 1 })
}

/// A packetized window with its right-edge timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub timestamp: f64,
    pub window: DMatrix<f64>,
}

/// Splits a `C×T` recording at rate `cfg.fs` into overlapping `C×L` windows.
pub fn packetize(signal: &DMatrix<f64>, cfg: &PacketizerConfig) -> Result<Vec<Packet>> {
    let grid = packet_grid(signal.ncols(), cfg)?;
    Ok(grid
        .windows(signal)
        .enumerate()
        .map(|(k, w)| Packet { timestamp: grid.timestamp(k, cfg.fs), window: w.into_owned() })
        .collect())
}

/// Standardized raw windows in `N×1×C×L` layout, stored flat and row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawWindows {
    pub count: usize,
    pub channels: usize,
    pub len: usize,
    pub data: Vec<f64>,
}

impl RawWindows {
    pub fn empty(channels: usize, len: usize) -> Self {
        Self { count: 0, channels, len, data: Vec::new() }
    }

    /// Window `k` as a channel-major slice of `C·L` values.
    pub fn window(&self, k: usize) -> &[f64] {
        let size = self.channels * self.len;
        &self.data[k * size..(k + 1) * size]
    }

    pub fn truncate(&mut self, count: usize) {
        if count < self.count {
            self.count = count;
            self.data.truncate(count * self.channels * self.len);
        }
    }
}

/// Aligned per-packet features sharing one set of timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketStream {
    /// `N×D` bandpower features, channel-major and band-minor.
    pub bandpower: DMatrix<f64>,
    pub raw: Option<RawWindows>,
    pub timestamps: Vec<f64>,
    pub channels: usize,
    pub bands: Vec<BandSpec>,
    pub dt: f64,
}

impl PacketStream {
    pub fn len(&self) -> usize {
        self.bandpower.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.bandpower.ncols()
    }

    /// Column of the feature for `channel` and band index `band`.
    pub fn feature_index(&self, channel: usize, band: usize) -> usize {
        channel * self.bands.len() + band
    }

    pub fn raw_len(&self) -> Option<usize> {
        self.raw.as_ref().map(|r| r.count)
    }
}

/// Options selecting which streams to build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Also build the CAR + EMS raw-window stream.
    pub raw_windows: bool,
    pub ems: EmsConfig,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { raw_windows: true, ems: EmsConfig::default() }
    }
}

/// Builds bandpower features (from unreferenced windows) and, optionally,
/// raw windows (from the CAR and EMS-standardized recording) for a `C×T`
/// recording already at `cfg.fs`.
pub fn build_feature_streams(
    recording: &DMatrix<f64>,
    cfg: &PacketizerConfig,
    bands: &[BandSpec],
    opts: &FeatureOptions,
) -> Result<PacketStream> {
    if bands.is_empty() {
        bail!(InvalidConfig, "at least one band is required");
    }
    bands.iter().try_for_each(|b| b.validate(cfg.fs))?;
    if recording.iter().any(|v| !v.is_finite()) {
        bail!(InvalidInput, "recording contains non-finite samples");
    }
    let grid = packet_grid(recording.ncols(), cfg)?;
    let channels = recording.nrows();
    let welch = Welch::for_window(cfg.fs, grid.len)?;
    let freqs = welch.freqs();

    let rows: Vec<Vec<f64>> = recording.row_iter().map(|r| r.iter().copied().collect()).collect();
    let k_bands = bands.len();
    let mut bandpower = DMatrix::zeros(grid.count, channels * k_bands);
    let mut density = vec![0.0; welch.bins()];
    for k in 0..grid.count {
        let start = grid.start(k);
        for (c, row) in rows.iter().enumerate() {
            welch.estimate_into(&row[start..start + grid.len], &mut density)?;
            for (b, band) in bands.iter().enumerate() {
                let p = super::spectrum::integrate_band(&freqs, &density, band.lo, band.hi);
                bandpower[(k, c * k_bands + b)] = p.max(0.0);
            }
        }
    }

    let raw = if opts.raw_windows {
        let referenced = car(recording)?;
        let standardized = ExpStandardizer::new(channels, opts.ems)?.standardize_all(&referenced)?;
        let mut data = Vec::with_capacity(grid.count * channels * grid.len);
        for w in grid.windows(&standardized) {
            for c in 0..channels {
                data.extend(w.row(c).iter().copied());
            }
        }
        Some(RawWindows { count: grid.count, channels, len: grid.len, data })
    } else {
        None
    };

    Ok(PacketStream {
        bandpower,
        raw,
        timestamps: grid.timestamps(cfg.fs),
        channels,
        bands: bands.to_vec(),
        dt: cfg.dt(),
    })
}
