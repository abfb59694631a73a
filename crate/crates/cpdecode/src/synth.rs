//! Synthetic pursuit streams with known linear ground truth.

use std::fmt;
use std::str::FromStr;

use cpdecode_core::labels::integrate;
use cpdecode_core::{BandSpec, LabelMode, LabelStream, PacketStream, PacketizerConfig, RunMeta};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::io::StreamBundle;

/// Log-scale AR(1) coefficient and innovation SD of the feature processes.
const FEATURE_PHI: f64 = 0.9;
const FEATURE_SD: f64 = 0.3;

/// How the true weights change over the stream.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Drift {
    #[default]
    None,
    /// An independent weight draw takes over at this fraction of the stream.
    Switch(f64),
    /// Relevant weights take a Gaussian step of this SD every packet.
    RandomWalk(f64),
}

impl FromStr for Drift {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, value) = s.split_once(':').unwrap_or((s, ""));
        let num = || value.parse::<f64>().map_err(|_| format!("drift {s:?} needs a numeric value"));
        match kind {
            "none" if value.is_empty() => Ok(Drift::None),
            "switch" => Ok(Drift::Switch(num()?)),
            "walk" | "random_walk" => Ok(Drift::RandomWalk(num()?)),
            _ => Err(format!("unknown drift {s:?} (none, switch:F, walk:R)")),
        }
    }
}

impl fmt::Display for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::None => f.write_str("none"),
            Drift::Switch(x) => write!(f, "switch:{x}"),
            Drift::RandomWalk(r) => write!(f, "walk:{r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Seed for the weights; defaults to `seed`.
    pub weight_seed: Option<u64>,
    pub n_packets: usize,
    pub dim: usize,
    pub n_relevant: usize,
    pub noise_std: f64,
    pub drift: Drift,
    /// Physical meaning of `Y = X W* + e`.
    pub mode: LabelMode,
    pub packetizer: PacketizerConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            weight_seed: None,
            n_packets: 2000,
            dim: 20,
            n_relevant: 10,
            noise_std: 0.1,
            drift: Drift::None,
            mode: LabelMode::Velocity,
            packetizer: PacketizerConfig::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.dim == 0 || self.n_relevant > self.dim {
            return Err(format!(
                "need 0 < dim and n_relevant ≤ dim, got dim {} n_relevant {}",
                self.dim, self.n_relevant
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(format!("noise_std must be ≥ 0, got {}", self.noise_std));
        }
        match self.drift {
            Drift::Switch(f) if !(0.0..=1.0).contains(&f) => Err(format!("switch fraction {f} outside [0, 1]")),
            Drift::RandomWalk(r) if !(r >= 0.0 && r.is_finite()) => Err(format!("walk rate {r} must be ≥ 0")),
            _ => self.packetizer.validate().map_err(|e| e.to_string()),
        }
    }
}

/// True weights behind a synthetic stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// `D×2` matrices as rows of `[w_x, w_y]`: the initial weights, then the
    /// post-switch draw or the final random-walk state.
    pub weights: Vec<Vec<[f64; 2]>>,
    /// First packet generated with the second matrix.
    pub switch_index: Option<usize>,
    pub n_relevant: usize,
}

impl GroundTruth {
    pub fn matrix(&self, i: usize) -> DMatrix<f64> {
        let w = &self.weights[i];
        DMatrix::from_fn(w.len(), 2, |r, c| w[r][c])
    }
}

struct Rng(ChaCha8Rng);

impl Rng {
    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    fn weights(&mut self, dim: usize, relevant: usize) -> DMatrix<f64> {
        DMatrix::from_fn(dim, 2, |j, _| if j < relevant { self.normal() } else { 0.0 })
    }
}

fn rows(w: &DMatrix<f64>) -> Vec<[f64; 2]> {
    w.row_iter().map(|r| [r[0], r[1]]).collect()
}

/// Generates features, labels and (for velocity or acceleration labels) the
/// matching velocity stream. Identical configs give bit-identical output.
pub fn synth_generate(cfg: &SynthConfig) -> Result<(StreamBundle, GroundTruth), String> {
    cfg.validate()?;
    let (n, d) = (cfg.n_packets, cfg.dim);
    let mut rng = Rng(ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut wrng = Rng(ChaCha8Rng::seed_from_u64(cfg.weight_seed.unwrap_or(cfg.seed) ^ 0x005e_ed0f_3e16_u64));

    let mut x = DMatrix::zeros(n, d);
    for c in 0..d {
        let mut s = 0.0;
        for r in 0..n {
            s = FEATURE_PHI * s + FEATURE_SD * rng.normal();
            x[(r, c)] = s.exp();
        }
    }

    let w0 = wrng.weights(d, cfg.n_relevant);
    let mut y = DMatrix::zeros(n, 2);
    let (switch_index, last) = match cfg.drift {
        Drift::None => {
            y = &x * &w0;
            (None, None)
        }
        Drift::Switch(f) => {
            let w1 = wrng.weights(d, cfg.n_relevant);
            let at = ((f * n as f64).floor() as usize).min(n);
            for k in 0..n {
                let w = if k < at { &w0 } else { &w1 };
                y.set_row(k, &(x.row(k) * w));
            }
            (Some(at), Some(w1))
        }
        Drift::RandomWalk(rate) => {
            let mut w = w0.clone();
            for k in 0..n {
                if k > 0 {
                    for j in 0..cfg.n_relevant {
                        for c in 0..2 {
                            w[(j, c)] += rate * wrng.normal();
                        }
                    }
                }
                y.set_row(k, &(x.row(k) * &w));
            }
            (None, Some(w))
        }
    };
    if cfg.noise_std > 0.0 {
        for v in y.iter_mut() {
            *v += cfg.noise_std * rng.normal();
        }
    }

    let p = &cfg.packetizer;
    let dt = p.dt();
    let velocity = match cfg.mode {
        LabelMode::Velocity => None,
        LabelMode::Acceleration if n > 0 => {
            let mut a = y.clone();
            a.set_row(0, &nalgebra::RowVector2::zeros());
            y.copy_from(&a);
            Some(integrate(&a, [0.0, 0.0], dt).map_err(|e| e.to_string())?)
        }
        _ => None,
    };

    let grid_len = p.window_len();
    let hop = p.hop();
    let packets = PacketStream {
        bandpower: x,
        raw: None,
        timestamps: (0..n).map(|k| (k * hop + grid_len) as f64 / p.fs).collect(),
        channels: d,
        bands: vec![BandSpec { name: "synthetic".into(), lo: 0.0, hi: p.fs / 2.0 }],
        dt,
    };
    let labels = LabelStream::new(y, cfg.mode, dt).map_err(|e| e.to_string())?;
    let mut weights = vec![rows(&w0)];
    weights.extend(last.as_ref().map(rows));
    let meta = RunMeta { subject: 0, session: 1, condition: "SYN".into(), run: (cfg.seed % 100) as u32 };
    Ok((
        StreamBundle { meta, packets, labels, velocity, trial_starts: Vec::new() },
        GroundTruth { weights, switch_index, n_relevant: cfg.n_relevant },
    ))
}
