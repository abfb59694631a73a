use std::path::Path;

use cpdecode::io::mat::{load_run, write_run, EegLayout, KeyMap, RunRecord};
use cpdecode::process_run;
use cpdecode::DataError;
use cpdecode_core::signal::FeatureOptions;
use cpdecode_core::{BandSpec, LabelSource, PacketizerConfig, RunMeta, Trajectory};
use hdf5_metno as hdf5;
use nalgebra::DMatrix;

fn record(channels: usize, samples: usize) -> RunRecord {
    let eeg = DMatrix::from_fn(channels, samples, |c, t| ((c * 31 + t * 7) % 97) as f64 / 97.0 - 0.5);
    let n = samples / 40;
    let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.04).collect();
    let pos: Vec<[f64; 2]> = t.iter().map(|&x| [x.sin(), x.cos()]).collect();
    let target: Vec<[f64; 2]> = t.iter().map(|&x| [x.sin() + 0.5, x.cos() - 0.5]).collect();
    let vel: Vec<[f64; 2]> = t.iter().map(|&x| [x.cos(), -x.sin()]).collect();
    RunRecord {
        meta: RunMeta { subject: 16, session: 2, condition: "CL".into(), run: 1 },
        eeg,
        fs: 1000.0,
        traj: Trajectory { t, cursor_pos: Some(pos), target_pos: Some(target), cursor_vel: Some(vel) },
        trial_starts: vec![0.0, 1.5],
    }
}

fn write(path: &Path, build: impl FnOnce(&hdf5::File)) {
    let f = hdf5::File::create(path).unwrap();
    build(&f);
}

fn put(f: &hdf5::File, name: &str, shape: &[usize], data: &[f64]) {
    f.new_dataset::<f64>().shape(shape.to_vec()).create(name).unwrap().write_raw(data).unwrap();
}

#[test]
fn round_trip_with_parsed_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("S16_Se02_CL_R01.mat");
    let rec = record(62, 4000);
    write_run(&p, &rec).unwrap();
    let back = load_run(&p, &KeyMap::default()).unwrap();
    assert_eq!(back, rec);
    assert_eq!(back.meta, RunMeta { subject: 16, session: 2, condition: "CL".into(), run: 1 });
}

#[test]
fn channels_first_orientation_and_fs_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("S01_Se01_DL_R03.mat");
    let rec = record(4, 400);
    write(&p, |f| {
        let row_major: Vec<f64> = rec.eeg.transpose().as_slice().to_vec();
        put(f, "data/eeg", &[4, 400], &row_major);
        put(f, "data/srate", &[1, 1], &[1000.0]);
        let flat: Vec<f64> = rec.traj.cursor_vel.as_ref().unwrap().iter().flatten().copied().collect();
        // stored 2×T
        let n = flat.len() / 2;
        let transposed: Vec<f64> =
            (0..2).flat_map(|c| (0..n).map(move |i| (i, c))).map(|(i, c)| flat[2 * i + c]).collect();
        put(f, "data/vel", &[2, n], &transposed);
    });
    let keys = KeyMap {
        eeg: "data/eeg".into(),
        fs: "data/srate".into(),
        cursor_vel: "data/vel".into(),
        traj_fs: Some(25.0),
        channels: Some(4),
        eeg_layout: EegLayout::ChannelsFirst,
        ..KeyMap::default()
    };
    let back = load_run(&p, &keys).unwrap();
    assert_eq!(back.eeg, rec.eeg);
    assert_eq!(back.fs, 1000.0);
    assert_eq!(back.traj.cursor_vel, rec.traj.cursor_vel);
    assert!(back.traj.cursor_pos.is_none());
    assert_eq!(back.traj.t, rec.traj.t);
    assert_eq!(back.meta.condition, "DL");
}

#[test]
fn missing_keys_are_all_listed() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("S01_Se01_CL_R01.mat");
    write(&p, |f| put(f, "other", &[2], &[1.0, 2.0]));
    match load_run(&p, &KeyMap::default()) {
        Err(DataError::MissingKeys { keys, .. }) => {
            for k in ["eeg", "fs", "cursor_pos", "target_pos", "cursor_vel"] {
                assert!(keys.iter().any(|x| x == k), "{k} not reported in {keys:?}");
            }
        }
        other => panic!("expected missing keys, got {other:?}"),
    }
}

#[test]
fn velocity_absent_positions_present() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("S02_Se01_CL_R01.mat");
    let mut rec = record(62, 4000);
    rec.traj.cursor_vel = None;
    write_run(&p, &rec).unwrap();
    let back = load_run(&p, &KeyMap::default()).unwrap();
    assert!(back.traj.cursor_vel.is_none());
    let b = process_run(
        &back,
        &PacketizerConfig::default(),
        &BandSpec::defaults(),
        &FeatureOptions::default(),
        LabelSource::Auto,
    )
    .unwrap();
    assert_eq!(b.labels.len(), 94);
    assert!(b.velocity.is_none());
    assert!(b.to_run_data().is_err());
}

#[test]
fn non_monotone_time_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("S03_Se01_CL_R01.mat");
    let mut rec = record(62, 400);
    rec.traj.t.swap(2, 3);
    write_run(&p, &rec).unwrap();
    assert!(matches!(load_run(&p, &KeyMap::default()), Err(DataError::Corrupt { .. })));
}

#[test]
fn wrong_channel_count_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("S03_Se01_CL_R02.mat");
    write_run(&p, &record(61, 400)).unwrap();
    assert!(matches!(load_run(&p, &KeyMap::default()), Err(DataError::Corrupt { .. })));
}

#[test]
fn truncated_file_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("S04_Se01_CL_R01.mat");
    write_run(&p, &record(62, 4000)).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    for keep in [bytes.len() / 2, 600, 10] {
        let cut = dir.path().join(format!("S04_Se01_CL_R{keep}.mat"));
        std::fs::write(&cut, &bytes[..keep]).unwrap();
        let r = load_run(&cut, &KeyMap::default());
        assert!(matches!(r, Err(DataError::Corrupt { .. })), "kept {keep} bytes: {r:?}");
    }
}

#[test]
fn dataset_layout_counts() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("S05_Se01_CL_R01.mat");
    write_run(&p, &record(62, 4000)).unwrap();
    let rec = load_run(&p, &KeyMap::default()).unwrap();
    let b = process_run(
        &rec,
        &PacketizerConfig::default(),
        &BandSpec::defaults(),
        &FeatureOptions::default(),
        LabelSource::Velocity,
    )
    .unwrap();
    assert_eq!((b.packets.len(), b.packets.feature_dim()), (94, 186));
    assert_eq!(b.packets.raw.as_ref().map(|r| (r.count, r.channels, r.len)), Some((94, 62, 63)));
    assert_eq!(b.trial_starts, vec![0, 32]);
}
