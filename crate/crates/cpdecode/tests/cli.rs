use std::path::Path;
use std::process::{Command, Output};

use cpdecode::io::{import_streams, read_predictions, write_predictions};
use cpdecode_core::eval::run_protocol;
use cpdecode_core::{ModelKind, ModelSpec, PredictionMode, RunReport};

fn cpdecode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpdecode")).args(args).env_remove("CPDECODE_DATA_DIR").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cpdecode(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn reports(dir: &Path) -> Vec<RunReport> {
    serde_json::from_str(&std::fs::read_to_string(dir.join("reports.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_is_deterministic_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["synth", "--out", s(d), "--seed", "7", "--n-packets", "300", "--csv"]);
    }
    for f in ["S01_Se01_SYN_R01.cpd", "S01_Se01_SYN_R01.ground_truth.json", "S01_Se01_SYN_R01.features.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["command"], "synth");
    assert!(manifest["versions"]["cpdecode"].is_string());
}

#[test]
fn switch_drift_records_both_matrices() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--out", s(dir.path()), "--drift", "switch:0.5", "--n-packets", "200"]);
    let gt: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("S01_Se01_SYN_R01.ground_truth.json")).unwrap())
            .unwrap();
    assert_eq!(gt["weights"].as_array().unwrap().len(), 2);
    assert_eq!(gt["switch_index"], 100);
}

#[test]
fn all_relevant_noiseless() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--out", s(dir.path()), "--noise", "0", "--n-relevant", "20", "--dim", "20", "--n-packets", "200"]);
    let gt: cpdecode::GroundTruth =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("S01_Se01_SYN_R01.ground_truth.json")).unwrap())
            .unwrap();
    assert!(gt.matrix(0).iter().all(|&w| w != 0.0));
}

#[test]
fn evaluate_two_models_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("out");
    ok(&["synth", "--out", s(&data), "--n-packets", "400", "--runs", "2"]);
    let stdout = ok(&[
        "evaluate",
        s(&data),
        "--out",
        s(&out),
        "--model",
        "ar,bayes_iso",
        "--mode",
        "velocity",
        "--traces",
        "--plot",
    ]);
    assert!(stdout.contains("geometric-mean ratio"));
    let r = reports(&out);
    assert_eq!(r.len(), 4);
    assert!(r.iter().all(|x| x.nmse.is_finite() && x.wall_time == 0.0));
    assert!(out.join("traces/S01_Se01_SYN_R01_ar_velocity.csv").is_file());
    assert!(out.join("plots/S01_Se01_SYN_R02_bayes_iso_velocity.png").is_file());
    for f in ["reports.csv", "summary.csv", "summary.json", "ratios.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let header = std::fs::read_to_string(out.join("traces/S01_Se01_SYN_R01_ar_velocity.csv")).unwrap();
    assert!(header.starts_with("packet_index,t,v_x,v_y,vhat_x,vhat_y\n200,"));

    // reruns are bit-identical
    let again = dir.path().join("again");
    ok(&["evaluate", s(&data), "--out", s(&again), "--model", "ar,bayes_iso", "--mode", "velocity"]);
    assert_eq!(std::fs::read(out.join("reports.json")).unwrap(), std::fs::read(again.join("reports.json")).unwrap());
}

#[test]
fn acceleration_mode_reports_finite_nmse() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("out");
    ok(&["synth", "--out", s(&data), "--n-packets", "300"]);
    ok(&["evaluate", s(&data), "--out", s(&out), "--model", "bayes_ard", "--mode", "acceleration"]);
    let r = reports(&out);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].mode, PredictionMode::Acceleration);
    assert!(r[0].nmse.is_finite());
    assert_eq!(r[0].v0_policy, "true_velocity_at_split");
}

#[test]
fn accumulative_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("out");
    ok(&["synth", "--out", s(&data), "--n-packets", "300", "--sessions", "2", "--runs", "2"]);
    ok(&[
        "evaluate",
        s(&data),
        "--out",
        s(&out),
        "--model",
        "bayes_ard",
        "--mode",
        "velocity",
        "--protocol",
        "accumulative",
    ]);
    let r = reports(&out);
    assert_eq!(r.len(), 4);
    assert_eq!(r.iter().filter(|x| x.session == 2).map(|x| x.n_calib).collect::<Vec<_>>(), [600, 600]);
}

#[test]
fn external_predictions_match_in_process_scores() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("out");
    ok(&["synth", "--out", s(&data), "--n-packets", "400"]);
    let bundle = import_streams(&data.join("S01_Se01_SYN_R01.cpd")).unwrap();
    let run = bundle.to_run_data().unwrap();
    let outcome = run_protocol(&run, &ModelSpec::new(ModelKind::Ar), PredictionMode::Velocity).unwrap();
    let pred = dir.path().join("pred.csv");
    write_predictions(&pred, outcome.eval_start, &outcome.predicted).unwrap();
    assert_eq!(read_predictions(&pred, 200..400).unwrap(), outcome.predicted);

    ok(&[
        "evaluate",
        s(&data),
        "--out",
        s(&out),
        "--model",
        "eegnet",
        "--mode",
        "velocity",
        "--predictions-from",
        s(&pred),
    ]);
    let r = reports(&out);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].model, ModelKind::Eegnet);
    assert!((r[0].nmse - outcome.report.nmse).abs() <= 1e-9 * outcome.report.nmse.max(1.0));
}

#[test]
fn report_aggregates_and_keeps_modes_apart() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("out");
    ok(&["synth", "--out", s(&data), "--n-packets", "300"]);
    ok(&["evaluate", s(&data), "--out", s(&out), "--model", "ar,bayes_ard"]);
    let agg = dir.path().join("agg");
    ok(&["report", s(&out), "--out", s(&agg)]);
    let summary = std::fs::read_to_string(agg.join("summary.csv")).unwrap();
    assert!(summary.contains("velocity,ar,all,*,1,"));
    assert!(summary.contains("acceleration,bayes_ard,all,*,1,"));
    let ratios = std::fs::read_to_string(agg.join("ratios.csv")).unwrap();
    let all_rows: Vec<&str> = ratios.lines().filter(|l| l.contains(",all,*,")).collect();
    assert_eq!(all_rows.len(), 2, "{ratios}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cpdecode(&["evaluate"]).status.code(), Some(1));
    assert_eq!(cpdecode(&["synth", "--out", s(dir.path()), "--n-relevant", "50"]).status.code(), Some(1));
    assert_eq!(cpdecode(&["evaluate", "--out", s(dir.path())]).status.code(), Some(1));
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(cpdecode(&["evaluate", s(&empty), "--out", s(&dir.path().join("o"))]).status.code(), Some(2));
    let bogus = dir.path().join("S01_Se01_CL_R01.cpd");
    std::fs::write(&bogus, b"garbage").unwrap();
    assert_eq!(cpdecode(&["evaluate", s(&bogus), "--out", s(&dir.path().join("o"))]).status.code(), Some(2));
}

#[test]
fn data_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--out", s(&data), "--n-packets", "200"]);
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_cpdecode"))
        .args(["evaluate", "--out", s(&out), "--model", "ar", "--mode", "velocity"])
        .env("CPDECODE_DATA_DIR", &data)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(reports(&out).len(), 1);
}

#[test]
fn ingest_mat_run() {
    use cpdecode::io::mat::{write_run, RunRecord};
    use cpdecode_core::{RunMeta, Trajectory};
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    std::fs::create_dir(&raw).unwrap();
    let n = 100;
    let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.04).collect();
    let rec = RunRecord {
        meta: RunMeta::default(),
        eeg: nalgebra::DMatrix::from_fn(62, 4000, |c, k| ((c + 3 * k) as f64 * 0.37).sin()),
        fs: 1000.0,
        traj: Trajectory {
            cursor_vel: Some(t.iter().map(|&x| [x.sin(), x.cos()]).collect()),
            t,
            ..Trajectory::default()
        },
        trial_starts: vec![],
    };
    write_run(&raw.join("S16_Se02_CL_R01.mat"), &rec).unwrap();
    let out = dir.path().join("streams");
    let stdout = ok(&["ingest", s(&raw), "--out", s(&out), "--csv"]);
    assert!(stdout.contains("S16_Se02_CL_R01: 94 packets × 186 features"));
    let b = import_streams(&out.join("S16_Se02_CL_R01.cpd")).unwrap();
    assert_eq!(b.packets.raw.as_ref().unwrap().count, 94);
    let header = std::fs::read_to_string(out.join("S16_Se02_CL_R01.features.csv")).unwrap();
    assert!(header.starts_with("packet_index,t,ch0_theta,ch0_alpha,ch0_beta,ch1_theta"));
}
