//! CSV mirrors of packet streams, labels and decoding traces.

use std::path::Path;

use cpdecode_core::eval::RunOutcome;
use cpdecode_core::{LabelStream, PacketStream};

use crate::error::{DataError, Result};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| DataError::format(path, e))
}

fn write_rows<I>(path: &Path, header: Vec<String>, rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = writer(path)?;
    let fail = |e: csv::Error| DataError::format(path, e);
    w.write_record(&header).map_err(fail)?;
    for row in rows {
        w.write_record(&row).map_err(fail)?;
    }
    w.flush().map_err(|e| DataError::io(path, e))
}

/// `packet_index,t,ch{c}_{band},...` in channel-major, band-minor order.
pub fn write_features(path: &Path, packets: &PacketStream) -> Result<()> {
    let mut header = vec!["packet_index".to_string(), "t".to_string()];
    for c in 0..packets.channels {
        for b in &packets.bands {
            header.push(format!("ch{c}_{}", b.name));
        }
    }
    let rows = (0..packets.len()).map(|k| {
        let mut row = vec![k.to_string(), packets.timestamps[k].to_string()];
        row.extend(packets.bandpower.row(k).iter().map(f64::to_string));
        row
    });
    write_rows(path, header, rows)
}

/// `packet_index,t,y_x,y_y`.
pub fn write_labels(path: &Path, labels: &LabelStream, timestamps: &[f64]) -> Result<()> {
    let header = ["packet_index", "t", "y_x", "y_y"].map(String::from).to_vec();
    let rows = (0..labels.len()).map(|k| {
        vec![k.to_string(), timestamps[k].to_string(), labels.y[(k, 0)].to_string(), labels.y[(k, 1)].to_string()]
    });
    write_rows(path, header, rows)
}

/// `packet_index,t,v_x,v_y,vhat_x,vhat_y` over the evaluated packets.
pub fn write_traces(path: &Path, outcome: &RunOutcome, dt: f64) -> Result<()> {
    let header = ["packet_index", "t", "v_x", "v_y", "vhat_x", "vhat_y"].map(String::from).to_vec();
    let rows = (0..outcome.truth.nrows()).map(|i| {
        let k = outcome.eval_start + i;
        vec![
            k.to_string(),
            (k as f64 * dt).to_string(),
            outcome.truth[(i, 0)].to_string(),
            outcome.truth[(i, 1)].to_string(),
            outcome.predicted[(i, 0)].to_string(),
            outcome.predicted[(i, 1)].to_string(),
        ]
    });
    write_rows(path, header, rows)
}
