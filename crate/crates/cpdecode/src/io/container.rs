//! Binary container for aligned packet streams.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes        | content                                   |
//! |--------------|-------------------------------------------|
//! | 8            | magic `CPDSTRM\0`                         |
//! | 4            | `u32` format version                      |
//! | 8            | `u64` header length `h`                   |
//! | `h`          | UTF-8 JSON header                         |
//! | rest         | `f64` arrays, row-major, at header offsets |
//!
//! Array offsets are relative to the start of the data section. The arrays
//! are `timestamps [N]`, `bandpower [N, D]`, `labels [N, 2]`, and optionally
//! `raw [N, 1, C, L]` and `velocity [N, 2]`. A reader needs nothing beyond
//! a JSON parser and a float reinterpret, e.g. `numpy.frombuffer`.

use std::fs;
use std::path::Path;

use cpdecode_core::signal::RawWindows;
use cpdecode_core::{BandSpec, LabelMode, LabelStream, PacketStream, RunData, RunMeta};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};

pub const MAGIC: &[u8; 8] = b"CPDSTRM\0";
pub const CONTAINER_VERSION: u32 = 1;

/// Packet and label streams of one run, ready for any decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamBundle {
    pub meta: RunMeta,
    pub packets: PacketStream,
    pub labels: LabelStream,
    /// `N×2` true velocity, when it differs from the labels or they are
    /// not velocity.
    pub velocity: Option<DMatrix<f64>>,
    /// Packet indices of trial onsets.
    pub trial_starts: Vec<usize>,
}

impl StreamBundle {
    /// True velocity: the explicit stream or velocity-mode labels.
    pub fn true_velocity(&self) -> Option<&DMatrix<f64>> {
        match (&self.velocity, self.labels.mode()) {
            (Some(v), _) => Some(v),
            (None, LabelMode::Velocity) => Some(&self.labels.y),
            _ => None,
        }
    }

    pub fn to_run_data(&self) -> std::result::Result<RunData, cpdecode_core::Error> {
        let v = self.true_velocity().ok_or_else(|| {
            cpdecode_core::Error::MissingData(format!("{} has no velocity stream to evaluate against", self.meta))
        })?;
        let mut run = RunData::new(self.meta.clone(), self.packets.bandpower.clone(), v.clone(), self.packets.dt)?;
        run.trial_starts = self.trial_starts.clone();
        Ok(run)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArrayDesc {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

impl ArrayDesc {
    fn count(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    meta: RunMeta,
    dt: f64,
    channels: usize,
    bands: Vec<BandSpec>,
    label_mode: LabelMode,
    trial_starts: Vec<usize>,
    arrays: Vec<ArrayDesc>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Serializes a bundle to bytes.
pub fn encode(bundle: &StreamBundle) -> Vec<u8> {
    let p = &bundle.packets;
    let n = p.len();
    let mut arrays: Vec<(String, Vec<usize>, Vec<f64>)> = vec![
        ("timestamps".into(), vec![n], p.timestamps.clone()),
        ("bandpower".into(), vec![n, p.feature_dim()], row_major(&p.bandpower)),
        ("labels".into(), vec![bundle.labels.len(), 2], row_major(&bundle.labels.y)),
    ];
    if let Some(raw) = &p.raw {
        arrays.push(("raw".into(), vec![raw.count, 1, raw.channels, raw.len], raw.data.clone()));
    }
    if let Some(v) = &bundle.velocity {
        arrays.push(("velocity".into(), vec![v.nrows(), 2], row_major(v)));
    }
    let mut offset = 0u64;
    let mut descs = Vec::with_capacity(arrays.len());
    for (name, shape, data) in &arrays {
        descs.push(ArrayDesc { name: name.clone(), shape: shape.clone(), offset });
        offset += 8 * data.len() as u64;
    }
    let header = Header {
        meta: bundle.meta.clone(),
        dt: p.dt,
        channels: p.channels,
        bands: p.bands.clone(),
        label_mode: bundle.labels.mode(),
        trial_starts: bundle.trial_starts.clone(),
        arrays: descs,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(20 + json.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, _, data) in &arrays {
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Parses bytes produced by [`encode`]; `path` is only used in errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<StreamBundle> {
    let corrupt = |reason: String| DataError::corrupt(path, reason);
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(DataError::format(path, "not a packet stream container"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CONTAINER_VERSION {
        return Err(DataError::SchemaVersion { path: path.to_path_buf(), found: version, expected: CONTAINER_VERSION });
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let data = bytes.get(20..).unwrap_or_default();
    if hlen > data.len() {
        return Err(corrupt("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&data[..hlen]).map_err(|e| corrupt(format!("bad header: {e}")))?;
    let data = &data[hlen..];

    let array = |name: &str| -> Result<Option<(Vec<usize>, Vec<f64>)>> {
        let Some(d) = header.arrays.iter().find(|a| a.name == name) else { return Ok(None) };
        let start = d.offset as usize;
        let end = start
            .checked_add(8 * d.count())
            .filter(|&e| e <= data.len())
            .ok_or_else(|| corrupt(format!("array {name} runs past the end of the file")))?;
        let values = data[start..end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Some((d.shape.clone(), values)))
    };
    let required = |name: &str| array(name)?.ok_or_else(|| corrupt(format!("missing array {name}")));
    let matrix = |shape: &[usize], v: &[f64], name: &str| -> Result<DMatrix<f64>> {
        match shape {
            [r, c] => Ok(DMatrix::from_row_slice(*r, *c, v)),
            _ => Err(corrupt(format!("array {name} must be 2-D"))),
        }
    };

    let (_, timestamps) = required("timestamps")?;
    let (bshape, bvals) = required("bandpower")?;
    let bandpower = matrix(&bshape, &bvals, "bandpower")?;
    let (lshape, lvals) = required("labels")?;
    let labels = matrix(&lshape, &lvals, "labels")?;
    let n = timestamps.len();
    if bandpower.nrows() != n || labels.nrows() != n {
        return Err(corrupt("stream lengths disagree".into()));
    }
    if bandpower.ncols() != header.channels * header.bands.len() {
        return Err(corrupt("bandpower width does not match channels × bands".into()));
    }
    let raw = match array("raw")? {
        Some((shape, data)) => match shape.as_slice() {
            [count, 1, channels, len] if *count == n => {
                Some(RawWindows { count: *count, channels: *channels, len: *len, data })
            }
            _ => return Err(corrupt(format!("raw array has shape {shape:?}"))),
        },
        None => None,
    };
    let velocity = match array("velocity")? {
        Some((shape, v)) => {
            let m = matrix(&shape, &v, "velocity")?;
            if m.nrows() != n || m.ncols() != 2 {
                return Err(corrupt("velocity must be N×2".into()));
            }
            Some(m)
        }
        None => None,
    };
    if header.trial_starts.iter().any(|&s| s >= n.max(1)) {
        return Err(corrupt("trial start beyond stream end".into()));
    }
    let packets =
        PacketStream { bandpower, raw, timestamps, channels: header.channels, bands: header.bands, dt: header.dt };
    let labels = LabelStream::new(labels, header.label_mode, header.dt)?;
    Ok(StreamBundle { meta: header.meta, packets, labels, velocity, trial_starts: header.trial_starts })
}

pub fn export_streams(path: &Path, bundle: &StreamBundle) -> Result<()> {
    fs::write(path, encode(bundle)).map_err(|e| DataError::io(path, e))
}

pub fn import_streams(path: &Path) -> Result<StreamBundle> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    decode(&bytes, path)
}
