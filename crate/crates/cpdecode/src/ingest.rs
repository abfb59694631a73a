//! Turns a loaded run into aligned packet streams.

use cpdecode_core::labels::{align, build_labels, resample_to_packets};
use cpdecode_core::signal::{build_feature_streams, decimate, FeatureOptions};
use cpdecode_core::{BandSpec, LabelMode, LabelSource, LabelStream, PacketizerConfig};

use crate::io::{RunRecord, StreamBundle};

/// Decimates, packetizes and labels one run. `cfg.fs_in` is replaced by the
/// recording's own rate.
pub fn process_run(
    record: &RunRecord,
    cfg: &PacketizerConfig,
    bands: &[BandSpec],
    opts: &FeatureOptions,
    source: LabelSource,
) -> cpdecode_core::Result<StreamBundle> {
    let cfg = PacketizerConfig { fs_in: record.fs, ..*cfg };
    cfg.validate()?;
    let factor = cfg.decimation_factor()?;
    let eeg = decimate(&record.eeg, factor, cfg.fs_in)?;
    let mut packets = build_feature_streams(&eeg, &cfg, bands, opts)?;

    let signal = build_labels(&record.traj, source)?;
    let y = resample_to_packets(&signal.values, &record.traj.t, &packets.timestamps)?;
    let mut labels = LabelStream::new(y, signal.mode, cfg.dt())?;
    let velocity = match (signal.mode, &record.traj.cursor_vel) {
        (LabelMode::Velocity, _) | (_, None) => None,
        (_, Some(v)) => Some(resample_to_packets(v, &record.traj.t, &packets.timestamps)?),
    };
    let n = align(&mut packets, &mut labels)?;
    let velocity = velocity.map(|v| v.rows(0, n).into_owned());

    let mut trial_starts: Vec<usize> = record
        .trial_starts
        .iter()
        .map(|&t| packets.timestamps.partition_point(|&tk| tk < t))
        .filter(|&k| k < n)
        .collect();
    trial_starts.dedup();
    Ok(StreamBundle { meta: record.meta.clone(), packets, labels, velocity, trial_starts })
}
