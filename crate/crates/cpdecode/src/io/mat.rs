//! Reader for continuous-pursuit runs stored as MATLAB v7.3 (HDF5) files.
//!
//! The dataset's internal variable names are configurable through a
//! [`KeyMap`], usually loaded from a small TOML file:
//!
//! ```toml
//! eeg = "eeg"               # channels × samples (either orientation)
//! fs = "fs"                 # scalar dataset or attribute (root or on `eeg`)
//! cursor_pos = "cursor_pos" # samples × 2
//! target_pos = "target_pos"
//! cursor_vel = "cursor_vel"
//! time = "time"             # trajectory timestamps in seconds, optional
//! traj_fs = 25.0            # used when `time` is absent
//! channels = 62
//! ```

use std::path::{Path, PathBuf};

use cpdecode_core::{RunMeta, Trajectory};
use hdf5_metno as hdf5;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};

/// Orientation of the stored EEG matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EegLayout {
    /// The smaller dimension is taken as channels.
    #[default]
    Auto,
    ChannelsFirst,
    SamplesFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeyMap {
    pub eeg: String,
    pub eeg_layout: EegLayout,
    pub fs: String,
    /// Sampling rate to use instead of reading `fs`.
    pub fs_value: Option<f64>,
    pub cursor_pos: String,
    pub target_pos: String,
    pub cursor_vel: String,
    pub time: String,
    pub traj_fs: Option<f64>,
    /// Trial onset times in seconds, optional.
    pub trial_starts: String,
    /// Expected channel count; `None` skips the check.
    pub channels: Option<usize>,
}

impl Default for KeyMap {
    fn default() -> Self {
        Self {
            eeg: "eeg".into(),
            eeg_layout: EegLayout::Auto,
            fs: "fs".into(),
            fs_value: None,
            cursor_pos: "cursor_pos".into(),
            target_pos: "target_pos".into(),
            cursor_vel: "cursor_vel".into(),
            time: "time".into(),
            traj_fs: None,
            trial_starts: "trial_starts".into(),
            channels: Some(62),
        }
    }
}

impl KeyMap {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        toml::from_str(&text).map_err(|e| DataError::format(path, e))
    }
}

/// One recorded run at source rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub meta: RunMeta,
    /// `C×T` at `fs`.
    pub eeg: DMatrix<f64>,
    pub fs: f64,
    pub traj: Trajectory,
    /// Trial onsets in seconds.
    pub trial_starts: Vec<f64>,
}

/// Parses `S16_Se02_CL_R01` style run names.
pub fn parse_run_name(name: &str) -> Option<RunMeta> {
    let stem = name.split('.').next()?;
    let parts: Vec<&str> = stem.split('_').collect();
    let [s, se, cond, r] = parts.as_slice() else { return None };
    let num = |p: &str, prefix: &str| p.strip_prefix(prefix)?.parse::<u32>().ok();
    let subject = num(s, "S")?;
    let session = num(se, "Se")?;
    let run = num(r, "R")?;
    if cond.is_empty() || !cond.chars().all(|c| c.is_ascii_alphanumeric()) {
        return None;
    }
    Some(RunMeta { subject, session, condition: cond.to_string(), run })
}

struct Reader<'a> {
    file: hdf5::File,
    path: &'a Path,
}

impl Reader<'_> {
    fn corrupt(&self, reason: impl Into<String>) -> DataError {
        DataError::corrupt(self.path, reason)
    }

    fn has(&self, key: &str) -> bool {
        !key.is_empty() && self.file.link_exists(key) && self.file.dataset(key).is_ok()
    }

    fn read(&self, key: &str) -> Result<(Vec<usize>, Vec<f64>)> {
        let ds = self.file.dataset(key).map_err(|e| self.corrupt(format!("{key}: {e}")))?;
        let data = ds.read_raw::<f64>().map_err(|e| self.corrupt(format!("{key}: {e}")))?;
        Ok((ds.shape(), data))
    }

    fn scalar_attr(&self, key: &str) -> Option<f64> {
        let from = |loc: &hdf5::Location| loc.attr(key).ok()?.read_raw::<f64>().ok()?.first().copied();
        if let Some(v) = from(&self.file) {
            return Some(v);
        }
        None
    }

    fn vector(&self, key: &str) -> Result<Vec<f64>> {
        let (shape, data) = self.read(key)?;
        if shape.iter().filter(|&&d| d > 1).count() > 1 {
            return Err(self.corrupt(format!("{key} must be a vector, has shape {shape:?}")));
        }
        Ok(data)
    }

    fn pairs(&self, key: &str) -> Result<Vec<[f64; 2]>> {
        let (shape, data) = self.read(key)?;
        match shape.as_slice() {
            [_, 2] => Ok(data.chunks_exact(2).map(|c| [c[0], c[1]]).collect()),
            [2, n] => Ok((0..*n).map(|i| [data[i], data[n + i]]).collect()),
            _ => Err(self.corrupt(format!("{key} must be T×2, has shape {shape:?}"))),
        }
    }
}

/// Loads one run; any inconsistency fails the whole load.
pub fn load_run(path: &Path, keys: &KeyMap) -> Result<RunRecord> {
    let file = hdf5::File::open(path).map_err(|e| DataError::corrupt(path, format!("cannot open as HDF5: {e}")))?;
    let r = Reader { file, path };

    let mut missing = Vec::new();
    if !r.has(&keys.eeg) {
        missing.push(keys.eeg.clone());
    }
    let fs = match keys.fs_value {
        Some(v) => Some(v),
        None if r.has(&keys.fs) => r.vector(&keys.fs)?.first().copied(),
        None => r.scalar_attr(&keys.fs).or_else(|| {
            let ds = r.file.dataset(&keys.eeg).ok()?;
            ds.attr(&keys.fs).ok()?.read_raw::<f64>().ok()?.first().copied()
        }),
    };
    if fs.is_none() {
        missing.push(keys.fs.clone());
    }
    let positions = r.has(&keys.cursor_pos) && r.has(&keys.target_pos);
    let velocity = r.has(&keys.cursor_vel);
    if !positions && !velocity {
        for k in [&keys.cursor_pos, &keys.target_pos, &keys.cursor_vel] {
            if !r.has(k) {
                missing.push(k.clone());
            }
        }
    }
    if !missing.is_empty() {
        return Err(DataError::MissingKeys { path: path.to_path_buf(), keys: missing });
    }
    let fs = fs.unwrap_or_default();
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(r.corrupt(format!("sampling rate {fs} is not positive")));
    }

    let (shape, data) = r.read(&keys.eeg)?;
    let [a, b] = shape.as_slice() else {
        return Err(r.corrupt(format!("{} must be 2-D, has shape {shape:?}", keys.eeg)));
    };
    let channels_first = match keys.eeg_layout {
        EegLayout::ChannelsFirst => true,
        EegLayout::SamplesFirst => false,
        EegLayout::Auto => a <= b,
    };
    let eeg = if channels_first {
        DMatrix::from_row_slice(*a, *b, &data)
    } else {
        // row-major T×C is column-major C×T
        DMatrix::from_column_slice(*b, *a, &data)
    };
    if let Some(expected) = keys.channels {
        if eeg.nrows() != expected {
            return Err(r.corrupt(format!("expected {expected} channels, found {}", eeg.nrows())));
        }
    }

    let cursor_pos = if positions || r.has(&keys.cursor_pos) { Some(r.pairs(&keys.cursor_pos)?) } else { None };
    let target_pos = if positions { Some(r.pairs(&keys.target_pos)?) } else { None };
    let cursor_vel = if velocity { Some(r.pairs(&keys.cursor_vel)?) } else { None };
    let len = cursor_vel.as_ref().or(cursor_pos.as_ref()).map_or(0, Vec::len);
    let t = if r.has(&keys.time) {
        r.vector(&keys.time)?
    } else {
        let rate = match keys.traj_fs {
            Some(rate) => rate,
            None if len == eeg.ncols() => fs,
            None => {
                return Err(DataError::MissingKeys { path: path.to_path_buf(), keys: vec![keys.time.clone()] });
            }
        };
        (0..len).map(|i| i as f64 / rate).collect()
    };
    let traj = Trajectory { t, cursor_pos, target_pos, cursor_vel };
    traj.validate().map_err(|e| r.corrupt(e.to_string()))?;
    if traj.t.len() < 2 {
        return Err(r.corrupt("trajectory has fewer than 2 samples"));
    }

    let trial_starts = if r.has(&keys.trial_starts) { r.vector(&keys.trial_starts)? } else { Vec::new() };
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or_default();
    let meta = parse_run_name(name).unwrap_or_else(|| RunMeta { condition: name.to_string(), ..RunMeta::default() });
    Ok(RunRecord { meta, eeg, fs, traj, trial_starts })
}

/// Writes a run in the layout [`load_run`] reads with the default key map
/// (samples-first EEG, as MATLAB stores it).
pub fn write_run(path: &Path, record: &RunRecord) -> Result<()> {
    let wrap = |e: hdf5::Error| DataError::format(path, e);
    let file = hdf5::File::create(path).map_err(wrap)?;
    let (c, t) = record.eeg.shape();
    file.new_dataset::<f64>()
        .shape((t, c))
        .create("eeg")
        .map_err(wrap)?
        .write_raw(record.eeg.as_slice())
        .map_err(wrap)?;
    file.new_attr::<f64>().create("fs").map_err(wrap)?.write_scalar(&record.fs).map_err(wrap)?;
    let put = |name: &str, v: &[[f64; 2]]| -> Result<()> {
        let flat: Vec<f64> = v.iter().flatten().copied().collect();
        file.new_dataset::<f64>().shape((v.len(), 2)).create(name).map_err(wrap)?.write_raw(&flat).map_err(wrap)
    };
    for (name, field) in [
        ("cursor_pos", &record.traj.cursor_pos),
        ("target_pos", &record.traj.target_pos),
        ("cursor_vel", &record.traj.cursor_vel),
    ] {
        if let Some(v) = field {
            put(name, v)?;
        }
    }
    file.new_dataset::<f64>()
        .shape(record.traj.t.len())
        .create("time")
        .map_err(wrap)?
        .write_raw(&record.traj.t)
        .map_err(wrap)?;
    if !record.trial_starts.is_empty() {
        file.new_dataset::<f64>()
            .shape(record.trial_starts.len())
            .create("trial_starts")
            .map_err(wrap)?
            .write_raw(&record.trial_starts)
            .map_err(wrap)?;
    }
    Ok(())
}

/// All `.mat` files under `dir`, sorted.
pub fn find_runs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| DataError::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| DataError::io(dir, e))?.path();
        if path.is_dir() {
            out.extend(find_runs(&path)?);
        } else if path.extension().is_some_and(|e| e == "mat" || e == "h5") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
