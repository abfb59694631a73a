//! Kinematic label construction, resampling and alignment.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::signal::{PacketStream, RawWindows};

/// Which recorded signal feeds the labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// `target − cursor`.
    PosError,
    #[default]
    Velocity,
    /// Position error when both positions exist, else velocity.
    Auto,
}

/// Physical meaning of a label stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    PosError,
    Velocity,
    Acceleration,
}

/// Cursor and target kinematics sampled at their own timestamps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub cursor_pos: Option<Vec<[f64; 2]>>,
    pub target_pos: Option<Vec<[f64; 2]>>,
    pub cursor_vel: Option<Vec<[f64; 2]>>,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        if self.t.windows(2).any(|w| !(w[1] > w[0])) {
            bail!(InvalidInput, "trajectory timestamps must be strictly increasing");
        }
        let n = self.t.len();
        for (name, field) in
            [("cursor_pos", &self.cursor_pos), ("target_pos", &self.target_pos), ("cursor_vel", &self.cursor_vel)]
        {
            if let Some(v) = field {
                if v.len() != n {
                    bail!(InvalidInput, "{name} has {} samples, timestamps have {n}", v.len());
                }
            }
        }
        let positions = self.cursor_pos.is_some() && self.target_pos.is_some();
        if !positions && self.cursor_vel.is_none() {
            return Err(Error::MissingData("trajectory needs cursor_pos and target_pos, or cursor_vel".into()));
        }
        Ok(())
    }
}

/// A continuous-time 2-D label signal on the trajectory's timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSignal {
    pub mode: LabelMode,
    pub values: Vec<[f64; 2]>,
}

/// Per-packet 2-D targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelStream {
    /// `N×2`.
    pub y: DMatrix<f64>,
    mode: LabelMode,
    pub dt: f64,
}

impl LabelStream {
    pub fn new(y: DMatrix<f64>, mode: LabelMode, dt: f64) -> Result<Self> {
        if y.ncols() != 2 {
            bail!(InvalidInput, "labels must have 2 columns, got {}", y.ncols());
        }
        Ok(Self { y, mode, dt })
    }

    pub fn mode(&self) -> LabelMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.y.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn field<'a>(f: &'a Option<Vec<[f64; 2]>>, name: &str) -> Result<&'a [[f64; 2]]> {
    f.as_deref().ok_or_else(|| Error::MissingData(format!("trajectory lacks {name}")))
}

/// Builds the label signal for `source` from a trajectory.
pub fn build_labels(traj: &Trajectory, source: LabelSource) -> Result<LabelSignal> {
    let source = match source {
        LabelSource::Auto if traj.cursor_pos.is_some() && traj.target_pos.is_some() => LabelSource::PosError,
        LabelSource::Auto => LabelSource::Velocity,
        s => s,
    };
    match source {
        LabelSource::PosError => {
            let cursor = field(&traj.cursor_pos, "cursor_pos")?;
            let target = field(&traj.target_pos, "target_pos")?;
            if cursor.len() != target.len() {
                bail!(InvalidInput, "cursor and target positions differ in length");
            }
            let values = target.iter().zip(cursor).map(|(t, c)| [t[0] - c[0], t[1] - c[1]]).collect();
            Ok(LabelSignal { mode: LabelMode::PosError, values })
        }
        _ => {
            let values = field(&traj.cursor_vel, "cursor_vel")?.to_vec();
            Ok(LabelSignal { mode: LabelMode::Velocity, values })
        }
    }
}

/// Linear interpolation of `y(t)` at `t_k`, clamped to the end values.
pub fn resample_to_packets(y: &[[f64; 2]], t: &[f64], t_k: &[f64]) -> Result<DMatrix<f64>> {
    if y.len() < 2 || t.len() != y.len() {
        return Err(Error::InsufficientData(format!(
            "need at least 2 matched label samples, got {} values and {} timestamps",
            y.len(),
            t.len()
        )));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        bail!(InvalidInput, "label timestamps must be strictly increasing");
    }
    if t_k.is_empty() {
        bail!(InvalidInput, "no packet timestamps");
    }
    let last = t.len() - 1;
    let mut out = DMatrix::zeros(t_k.len(), 2);
    // t_k is usually sorted, so the search cursor rarely moves backwards
    let mut j = 0usize;
    for (k, &tq) in t_k.iter().enumerate() {
        let v = if tq <= t[0] {
            y[0]
        } else if tq >= t[last] {
            y[last]
        } else {
            if t[j] > tq {
                j = t.partition_point(|&x| x <= tq) - 1;
            }
            while t[j + 1] <= tq {
                j += 1;
            }
            let w = (tq - t[j]) / (t[j + 1] - t[j]);
            [y[j][0] + w * (y[j + 1][0] - y[j][0]), y[j][1] + w * (y[j + 1][1] - y[j][1])]
        };
        out[(k, 0)] = v[0];
        out[(k, 1)] = v[1];
    }
    Ok(out)
}

/// Head-truncates features, raw windows and labels to their common length.
pub fn align(packets: &mut PacketStream, labels: &mut LabelStream) -> Result<usize> {
    let n_raw = packets.raw.as_ref().map_or(usize::MAX, |r: &RawWindows| r.count);
    let n = packets.len().min(n_raw).min(labels.len());
    if n == 0 {
        return Err(Error::EmptyAlignment);
    }
    if packets.len() > n {
        packets.bandpower = packets.bandpower.rows(0, n).into_owned();
        packets.timestamps.truncate(n);
    }
    if let Some(raw) = packets.raw.as_mut() {
        raw.truncate(n);
    }
    if labels.len() > n {
        labels.y = labels.y.rows(0, n).into_owned();
    }
    Ok(n)
}

/// Finite-difference acceleration; row 0 is zero.
pub fn to_acceleration(v: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    if v.nrows() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 velocity rows, got {}", v.nrows())));
    }
    if !(dt > 0.0) {
        bail!(InvalidConfig, "dt must be positive");
    }
    let mut a = DMatrix::zeros(v.nrows(), v.ncols());
    for k in 1..v.nrows() {
        for c in 0..v.ncols() {
            a[(k, c)] = (v[(k, c)] - v[(k - 1, c)]) / dt;
        }
    }
    Ok(a)
}

/// Euler integration `v̂[k] = v̂[k−1] + â[k]·dt` starting from `v0`.
pub fn integrate(a_hat: &DMatrix<f64>, v0: [f64; 2], dt: f64) -> Result<DMatrix<f64>> {
    if !(v0[0].is_finite() && v0[1].is_finite()) {
        bail!(InvalidInput, "initial velocity must be finite");
    }
    if !(dt > 0.0) {
        bail!(InvalidConfig, "dt must be positive");
    }
    let mut v = DMatrix::zeros(a_hat.nrows(), 2);
    let mut prev = v0;
    for k in 0..a_hat.nrows() {
        for c in 0..2 {
            prev[c] += a_hat[(k, c)] * dt;
            v[(k, c)] = prev[c];
        }
    }
    Ok(v)
}
