use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::protocol::{ModelKind, PredictionMode, RunReport};

/// Subset of reports a summary row covers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "group_by", content = "group", rename_all = "snake_case")]
pub enum Grouping {
    All,
    Subject(u32),
    Session(u32),
    Condition(String),
}

impl Grouping {
    pub fn key(&self) -> (&'static str, String) {
        match self {
            Grouping::All => ("all", "*".to_string()),
            Grouping::Subject(s) => ("subject", s.to_string()),
            Grouping::Session(s) => ("session", s.to_string()),
            Grouping::Condition(c) => ("condition", c.clone()),
        }
    }

    fn of(report: &RunReport) -> [Grouping; 4] {
        [
            Grouping::All,
            Grouping::Subject(report.subject),
            Grouping::Session(report.session),
            Grouping::Condition(report.condition.clone()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: PredictionMode,
    pub model: ModelKind,
    pub grouping: Grouping,
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    pub sd: f64,
    pub geo_mean: f64,
}

/// `model_a` relative to `model_b` on the log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub mode: PredictionMode,
    pub grouping: Grouping,
    pub model_a: ModelKind,
    pub model_b: ModelKind,
    /// `mean ln(nmse_a) − mean ln(nmse_b)`.
    pub log_diff: f64,
    /// Ratio of geometric means, `exp(log_diff)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub ratios: Vec<RatioRow>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn mean_log(values: &[f64]) -> f64 {
    values.iter().map(|v| libm::log(v.max(f64::MIN_POSITIVE))).sum::<f64>() / values.len() as f64
}

/// Descriptive NMSE statistics per mode × model × grouping, and pairwise
/// geometric-mean ratios between models within each mode and grouping.
/// Modes are never pooled.
pub fn aggregate(reports: &[RunReport]) -> Summary {
    let mut cells: BTreeMap<(PredictionMode, Grouping, ModelKind), Vec<f64>> = BTreeMap::new();
    for r in reports {
        for g in Grouping::of(r) {
            cells.entry((r.mode, g, r.model)).or_default().push(r.nmse);
        }
    }

    let mut summary = Summary::default();
    for ((mode, grouping, model), values) in &mut cells {
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
        } else {
            0.0
        };
        summary.rows.push(SummaryRow {
            mode: *mode,
            model: *model,
            grouping: grouping.clone(),
            n,
            median: median(values),
            mean,
            sd,
            geo_mean: libm::exp(mean_log(values)),
        });
    }

    let keys: Vec<_> = cells.keys().cloned().collect();
    for (i, (mode_a, group_a, model_a)) in keys.iter().enumerate() {
        for (mode_b, group_b, model_b) in &keys[i + 1..] {
            if mode_a != mode_b || group_a != group_b {
                continue;
            }
            let la = mean_log(&cells[&(*mode_a, group_a.clone(), *model_a)]);
            let lb = mean_log(&cells[&(*mode_b, group_b.clone(), *model_b)]);
            summary.ratios.push(RatioRow {
                mode: *mode_a,
                grouping: group_a.clone(),
                model_a: *model_a,
                model_b: *model_b,
                log_diff: la - lb,
                ratio: libm::exp(la - lb),
            });
        }
    }
    summary
}
