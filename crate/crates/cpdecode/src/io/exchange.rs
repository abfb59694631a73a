//! Prediction-exchange CSV: `packet_index,yhat_x,yhat_y`, one row per
//! decoded packet, indices into the run's aligned packet stream.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub packet_index: usize,
    pub yhat_x: f64,
    pub yhat_y: f64,
}

/// Writes `predictions` (rows×2) with indices starting at `first_index`.
pub fn write_predictions(path: &Path, first_index: usize, predictions: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| DataError::format(path, e))?;
    for (i, row) in predictions.row_iter().enumerate() {
        w.serialize(PredictionRow { packet_index: first_index + i, yhat_x: row[0], yhat_y: row[1] })
            .map_err(|e| DataError::format(path, e))?;
    }
    w.flush().map_err(|e| DataError::io(path, e))
}

/// Reads predictions for packets `range.start..range.end` as a matrix in
/// packet order. Rows outside the range are ignored; every packet inside it
/// must appear exactly once.
pub fn read_predictions(path: &Path, range: std::ops::Range<usize>) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => DataError::io(path, io),
        other => DataError::format(path, format!("{other:?}")),
    })?;
    let headers = r.headers().map_err(|e| DataError::format(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["packet_index", "yhat_x", "yhat_y"] {
        return Err(DataError::format(
            path,
            format!(
                "expected header packet_index,yhat_x,yhat_y, found {}",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let n = range.len();
    let mut out = DMatrix::from_element(n, 2, f64::NAN);
    let mut seen = vec![false; n];
    for (line, row) in r.deserialize::<PredictionRow>().enumerate() {
        let row = row.map_err(|e| DataError::format(path, format!("row {}: {e}", line + 1)))?;
        if !range.contains(&row.packet_index) {
            continue;
        }
        let i = row.packet_index - range.start;
        if std::mem::replace(&mut seen[i], true) {
            return Err(DataError::corrupt(path, format!("packet {} predicted twice", row.packet_index)));
        }
        if !(row.yhat_x.is_finite() && row.yhat_y.is_finite()) {
            return Err(DataError::corrupt(path, format!("packet {} has a non-finite prediction", row.packet_index)));
        }
        out[(i, 0)] = row.yhat_x;
        out[(i, 1)] = row.yhat_y;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        let missing = seen.iter().filter(|s| !**s).count();
        return Err(DataError::corrupt(
            path,
            format!("{missing} packets in {}..{} lack predictions, first {}", range.start, range.end, range.start + i),
        ));
    }
    Ok(out)
}
