//! Per-run reports and aggregate summaries on disk.

use std::fs;
use std::path::{Path, PathBuf};

use cpdecode_core::eval::Summary;
use cpdecode_core::RunReport;

use crate::error::{DataError, Result};

pub const REPORTS_JSON: &str = "reports.json";
pub const REPORTS_CSV: &str = "reports.csv";

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| DataError::format(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| DataError::io(path, e))
}

/// Writes `reports.json` and `reports.csv` into `dir`.
pub fn write_reports(dir: &Path, reports: &[RunReport]) -> Result<()> {
    write_json(&dir.join(REPORTS_JSON), &reports)?;
    let path = dir.join(REPORTS_CSV);
    let mut w = csv::Writer::from_path(&path).map_err(|e| DataError::format(&path, e))?;
    for r in reports {
        w.serialize(r).map_err(|e| DataError::format(&path, e))?;
    }
    w.flush().map_err(|e| DataError::io(&path, e))
}

/// Reads reports from a `reports.json` file or from every such file below
/// a directory.
pub fn read_reports(path: &Path) -> Result<Vec<RunReport>> {
    let mut files = Vec::new();
    collect(path, &mut files)?;
    if files.is_empty() {
        return Err(DataError::format(path, format!("no {REPORTS_JSON} found")));
    }
    let mut out = Vec::new();
    for f in files {
        let text = fs::read_to_string(&f).map_err(|e| DataError::io(&f, e))?;
        let mut reports: Vec<RunReport> = serde_json::from_str(&text).map_err(|e| DataError::format(&f, e))?;
        out.append(&mut reports);
    }
    Ok(out)
}

fn collect(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_file() {
        out.push(path.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> =
        fs::read_dir(path).map_err(|e| DataError::io(path, e))?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == REPORTS_JSON) {
            out.push(p);
        }
    }
    Ok(())
}

/// Writes `summary.json`, `summary.csv` and `ratios.csv` into `dir`.
pub fn write_summary(dir: &Path, summary: &Summary) -> Result<()> {
    write_json(&dir.join("summary.json"), summary)?;

    let path = dir.join("summary.csv");
    let fail = |p: &Path, e: csv::Error| DataError::format(p, e);
    let mut w = csv::Writer::from_path(&path).map_err(|e| fail(&path, e))?;
    w.write_record(["mode", "model", "group_by", "group", "n", "median", "mean", "sd", "geo_mean"])
        .map_err(|e| fail(&path, e))?;
    for r in &summary.rows {
        let (by, key) = r.grouping.key();
        w.write_record([
            r.mode.name().to_string(),
            r.model.name().to_string(),
            by.to_string(),
            key,
            r.n.to_string(),
            r.median.to_string(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.geo_mean.to_string(),
        ])
        .map_err(|e| fail(&path, e))?;
    }
    w.flush().map_err(|e| DataError::io(&path, e))?;

    let path = dir.join("ratios.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| fail(&path, e))?;
    w.write_record(["mode", "group_by", "group", "model_a", "model_b", "log_diff", "ratio"])
        .map_err(|e| fail(&path, e))?;
    for r in &summary.ratios {
        let (by, key) = r.grouping.key();
        w.write_record([
            r.mode.name().to_string(),
            by.to_string(),
            key,
            r.model_a.name().to_string(),
            r.model_b.name().to_string(),
            r.log_diff.to_string(),
            r.ratio.to_string(),
        ])
        .map_err(|e| fail(&path, e))?;
    }
    w.flush().map_err(|e| DataError::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cpdecode_core::eval::{aggregate, Protocol, V0_POLICY};
    use cpdecode_core::{ModelKind, PredictionMode};

    fn report(subject: u32, model: ModelKind, nmse: f64) -> RunReport {
        RunReport {
            subject,
            session: 1,
            condition: "CL".into(),
            run: 1,
            model,
            mode: PredictionMode::Velocity,
            protocol: Protocol::MidRun,
            nmse,
            n_calib: 10,
            n_eval: 10,
            wall_time: 0.0,
            v0_policy: V0_POLICY.into(),
        }
    }

    #[test]
    fn reports_round_trip_through_dirs() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b/nested");
        fs::create_dir_all(&a).unwrap();
        fs::create_dir_all(&b).unwrap();
        let ra = vec![report(1, ModelKind::BayesArd, 0.5), report(1, ModelKind::Ar, 1.0)];
        let rb = vec![report(2, ModelKind::BayesArd, 0.25)];
        write_reports(&a, &ra).unwrap();
        write_reports(&b, &rb).unwrap();
        let all = read_reports(dir.path()).unwrap();
        assert_eq!(all, [ra.clone(), rb].concat());
        assert_eq!(read_reports(&a.join(REPORTS_JSON)).unwrap(), ra);
        let csv = fs::read_to_string(a.join(REPORTS_CSV)).unwrap();
        assert!(csv.lines().next().unwrap().starts_with("subject,session,condition,run,model,mode,protocol,nmse"));
        assert!(csv.contains("bayes_ard,velocity,mid_run,0.5"));
    }

    #[test]
    fn summary_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = aggregate(&[report(1, ModelKind::BayesArd, 0.5), report(1, ModelKind::Ar, 1.0)]);
        write_summary(dir.path(), &s).unwrap();
        let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(text.contains("velocity,bayes_ard,all,*,1,0.5,0.5,0,0.5"));
        let ratios = fs::read_to_string(dir.path().join("ratios.csv")).unwrap();
        assert!(ratios.lines().count() >= 2);
        let back: Summary =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
