//! Key-value model snapshots shared by every decoder.
//!
//! Matrices are stored row-major with explicit dimensions so the container
//! is readable without knowing the in-memory layout.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SnapshotValue {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix { rows: usize, cols: usize, data: Vec<f64> },
    Text(String),
}

impl SnapshotValue {
    pub fn matrix(m: &DMatrix<f64>) -> Self {
        let data = m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect();
        SnapshotValue::Matrix { rows: m.nrows(), cols: m.ncols(), data }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub kind: String,
    pub entries: BTreeMap<String, SnapshotValue>,
}

impl Snapshot {
    pub fn new(kind: &str) -> Self {
        Self { version: SNAPSHOT_VERSION, kind: kind.to_string(), entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, key: &str, value: SnapshotValue) {
        self.entries.insert(key.to_string(), value);
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.version != SNAPSHOT_VERSION {
            return Err(Error::InvalidInput(format!("unsupported snapshot version {}", self.version)));
        }
        if self.kind != kind {
            return Err(Error::InvalidInput(format!("snapshot holds a {} model, expected {kind}", self.kind)));
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Result<&SnapshotValue> {
        self.entries.get(key).ok_or_else(|| Error::MissingData(format!("snapshot key {key}")))
    }

    fn wrong(key: &str, want: &str) -> Error {
        Error::InvalidInput(format!("snapshot key {key} is not a {want}"))
    }

    pub fn scalar(&self, key: &str) -> Result<f64> {
        match self.get(key)? {
            SnapshotValue::Scalar(v) => Ok(*v),
            _ => Err(Self::wrong(key, "scalar")),
        }
    }

    pub fn vector(&self, key: &str) -> Result<&[f64]> {
        match self.get(key)? {
            SnapshotValue::Vector(v) => Ok(v),
            _ => Err(Self::wrong(key, "vector")),
        }
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        match self.get(key)? {
            SnapshotValue::Text(v) => Ok(v),
            _ => Err(Self::wrong(key, "text")),
        }
    }

    pub fn matrix_parts(&self, key: &str) -> Result<(usize, usize, &[f64])> {
        match self.get(key)? {
            SnapshotValue::Matrix { rows, cols, data } if data.len() == rows * cols => Ok((*rows, *cols, data)),
            _ => Err(Self::wrong(key, "matrix")),
        }
    }

    pub fn matrix(&self, key: &str) -> Result<DMatrix<f64>> {
        let (rows, cols, data) = self.matrix_parts(key)?;
        Ok(DMatrix::from_row_slice(rows, cols, data))
    }
}
