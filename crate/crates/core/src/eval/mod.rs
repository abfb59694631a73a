//! Prediction modes, calibration/evaluation protocols and NMSE scoring.

mod aggregate;
mod protocol;

pub use aggregate::{aggregate, Grouping, RatioRow, Summary, SummaryRow};
pub use protocol::{
    run_protocol, score_external, session_accumulative, CalibrationHistory, Decoder, ModelKind, ModelSpec,
    PredictionMode, Protocol, RunData, RunMeta, RunOutcome, RunReport, V0_POLICY,
};

use alloc::format;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Normalized squared error `Σ‖v − v̂‖² / Σ‖v‖²`.
pub fn nmse(truth: &DMatrix<f64>, predicted: &DMatrix<f64>) -> Result<f64> {
    if truth.shape() != predicted.shape() {
        return Err(Error::InvalidInput(format!(
            "shape mismatch: truth {:?}, prediction {:?}",
            truth.shape(),
            predicted.shape()
        )));
    }
    let energy = truth.norm_squared();
    if !(energy > 0.0) {
        return Err(Error::UndefinedMetric("true signal has zero energy".into()));
    }
    let err = (truth - predicted).norm_squared();
    if !err.is_finite() {
        return Err(Error::Numerical("prediction error is not finite".into()));
    }
    Ok(err / energy)
}
