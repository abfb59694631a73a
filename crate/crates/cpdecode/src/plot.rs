//! Minimal true-vs-decoded velocity line plots.

use std::path::Path;

use nalgebra::DMatrix;
use plotters::prelude::*;

use crate::error::{DataError, Result};

const SIZE: (u32, u32) = (900, 500);

/// Writes a PNG with one panel per velocity component: truth in black,
/// decoded in red. Text is omitted so no font backend is needed.
pub fn plot_traces(path: &Path, truth: &DMatrix<f64>, predicted: &DMatrix<f64>) -> Result<()> {
    let fail = |e: String| DataError::format(path, e);
    let root = BitMapBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| fail(e.to_string()))?;
    let n = truth.nrows().max(1);
    for (c, area) in root.split_evenly((2, 1)).iter().enumerate() {
        let (tc, pc) = (truth.column(c), predicted.column(c));
        let vals = tc.iter().chain(pc.iter()).copied().filter(|v| v.is_finite());
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let (lo, hi) = if lo < hi { (lo, hi) } else { (-1.0, 1.0) };
        let pad = 0.05 * (hi - lo);
        let mut chart = ChartBuilder::on(area)
            .margin(10)
            .build_cartesian_2d(0f64..n as f64, (lo - pad)..(hi + pad))
            .map_err(|e| fail(e.to_string()))?;
        for (m, color) in [(truth, BLACK), (predicted, RED)] {
            let series = m.column(c).iter().enumerate().map(|(i, &v)| (i as f64, v)).collect::<Vec<_>>();
            chart.draw_series(LineSeries::new(series, &color)).map_err(|e| fail(e.to_string()))?;
        }
    }
    root.present().map_err(|e| fail(e.to_string()))
}
