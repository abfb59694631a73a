use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::nmse;
use crate::bayes::{BayesConfig, BayesDecoder, Prior, SufficientStats};
use crate::error::{bail, Error, Result};
use crate::labels::{integrate, to_acceleration};
use crate::ridge::{fit_ridge, RidgeModel, DEFAULT_LAMBDA};

/// Initial condition used when integrating decoded acceleration.
pub const V0_POLICY: &str = "true_velocity_at_split";

/// Identifiers of one recorded run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct RunMeta {
    pub subject: u32,
    pub session: u32,
    pub condition: String,
    pub run: u32,
}

impl fmt::Display for RunMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{:02}_Se{:02}_{}_R{:02}", self.subject, self.session, self.condition, self.run)
    }
}

/// Aligned features and true velocity of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunData {
    pub meta: RunMeta,
    /// `N×D` bandpower features.
    pub features: DMatrix<f64>,
    /// `N×2` true velocity.
    pub velocity: DMatrix<f64>,
    pub dt: f64,
    /// Packet indices where a new trial begins.
    pub trial_starts: Vec<usize>,
}

impl RunData {
    pub fn new(meta: RunMeta, features: DMatrix<f64>, velocity: DMatrix<f64>, dt: f64) -> Result<Self> {
        if features.nrows() != velocity.nrows() || velocity.ncols() != 2 {
            bail!(
                InvalidInput,
                "features have {} rows but velocity is {}×{}",
                features.nrows(),
                velocity.nrows(),
                velocity.ncols()
            );
        }
        if !(dt > 0.0) {
            bail!(InvalidConfig, "dt must be positive");
        }
        Ok(Self { meta, features, velocity, dt, trial_starts: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First evaluation packet: `floor(N/2)`.
    pub fn split(&self) -> usize {
        self.len() / 2
    }

    /// Regression targets for `mode`.
    pub fn targets(&self, mode: PredictionMode) -> Result<DMatrix<f64>> {
        match mode {
            PredictionMode::Velocity => Ok(self.velocity.clone()),
            PredictionMode::Acceleration => to_acceleration(&self.velocity, self.dt),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    BayesArd,
    BayesIso,
    Ar,
    /// Scored from externally produced predictions.
    Eegnet,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::BayesArd => "bayes_ard",
            ModelKind::BayesIso => "bayes_iso",
            ModelKind::Ar => "ar",
            ModelKind::Eegnet => "eegnet",
        }
    }

    pub fn is_bayes(self) -> bool {
        matches!(self, ModelKind::BayesArd | ModelKind::BayesIso)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bayes_ard" | "bayes" => ModelKind::BayesArd,
            "bayes_iso" => ModelKind::BayesIso,
            "ar" => ModelKind::Ar,
            "eegnet" => ModelKind::Eegnet,
            other => bail!(InvalidConfig, "unknown model {other:?}"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    Velocity,
    Acceleration,
}

impl PredictionMode {
    pub fn name(self) -> &'static str {
        match self {
            PredictionMode::Velocity => "velocity",
            PredictionMode::Acceleration => "acceleration",
        }
    }
}

impl fmt::Display for PredictionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PredictionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "velocity" => Ok(PredictionMode::Velocity),
            "acceleration" => Ok(PredictionMode::Acceleration),
            other => bail!(InvalidConfig, "unknown mode {other:?}"),
        }
    }
}

/// Model choice with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub bayes: BayesConfig,
    pub ridge_lambda: f64,
    /// Bayes models keep adapting on evaluation packets.
    pub adapt: bool,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self { kind, bayes: BayesConfig::default(), ridge_lambda: DEFAULT_LAMBDA, adapt: true }
    }

    /// Same model with parameters frozen after calibration.
    pub fn frozen(mut self) -> Self {
        self.adapt = false;
        self
    }

    fn prior(&self, dim: usize) -> Result<Prior> {
        match self.kind {
            ModelKind::BayesArd => Ok(Prior::ard(dim, self.bayes.alpha_init)),
            ModelKind::BayesIso => Ok(Prior::isotropic(self.bayes.alpha_init)),
            _ => bail!(InvalidConfig, "{} has no Bayesian prior", self.kind),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    MidRun,
    SessionAccumulative,
}

/// Score and bookkeeping for one evaluated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub subject: u32,
    pub session: u32,
    pub condition: String,
    pub run: u32,
    pub model: ModelKind,
    pub mode: PredictionMode,
    pub protocol: Protocol,
    pub nmse: f64,
    pub n_calib: usize,
    pub n_eval: usize,
    /// Seconds spent calibrating and evaluating; filled in by the caller.
    pub wall_time: f64,
    pub v0_policy: String,
}

impl RunReport {
    pub fn meta(&self) -> RunMeta {
        RunMeta { subject: self.subject, session: self.session, condition: self.condition.clone(), run: self.run }
    }
}

/// Report plus the velocity traces it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: RunReport,
    /// Index of the first evaluated packet.
    pub eval_start: usize,
    /// `n_eval×2` true velocity.
    pub truth: DMatrix<f64>,
    /// `n_eval×2` decoded velocity.
    pub predicted: DMatrix<f64>,
}

/// A per-packet decoder driven by the evaluation loop.
pub trait Decoder {
    fn predict(&self, x: &[f64]) -> Result<[f64; 2]>;

    /// Feeds back the true label after a prediction. No-op for static models.
    fn observe(&mut self, _x: &[f64], _y: [f64; 2]) -> Result<()> {
        Ok(())
    }
}

impl Decoder for BayesDecoder {
    fn predict(&self, x: &[f64]) -> Result<[f64; 2]> {
        BayesDecoder::predict(self, x)
    }

    fn observe(&mut self, x: &[f64], y: [f64; 2]) -> Result<()> {
        BayesDecoder::observe(self, x, y).map(|_| ())
    }
}

impl Decoder for RidgeModel {
    fn predict(&self, x: &[f64]) -> Result<[f64; 2]> {
        RidgeModel::predict(self, x)
    }
}

#[derive(Clone)]
#[allow(clippy::large_enum_variant)]
enum Fitted {
    Bayes(BayesDecoder),
    Ridge(RidgeModel),
}

fn require_internal(spec: &ModelSpec) -> Result<()> {
    if spec.kind == ModelKind::Eegnet {
        bail!(InvalidConfig, "eegnet is scored from an exchange file, not fitted here");
    }
    Ok(())
}

fn calibrate(spec: &ModelSpec, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Fitted> {
    require_internal(spec)?;
    if spec.kind.is_bayes() {
        BayesDecoder::fit(x, y, spec.prior(x.ncols())?, spec.bayes).map(Fitted::Bayes)
    } else {
        fit_ridge(x, y, spec.ridge_lambda).map(Fitted::Ridge)
    }
}

/// Predicts packets `start..N` in target space, feeding back true targets
/// when `adapt` is set.
fn run_decoder<D: Decoder>(
    decoder: &mut D,
    features: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    start: usize,
    adapt: bool,
) -> Result<DMatrix<f64>> {
    let n = features.nrows();
    let mut out = DMatrix::zeros(n - start, 2);
    let mut x = Vec::with_capacity(features.ncols());
    for k in start..n {
        x.clear();
        x.extend(features.row(k).iter().copied());
        let yhat = decoder.predict(&x)?;
        out[(k - start, 0)] = yhat[0];
        out[(k - start, 1)] = yhat[1];
        if adapt {
            decoder.observe(&x, [targets[(k, 0)], targets[(k, 1)]])?;
        }
    }
    Ok(out)
}

fn evaluate(
    fitted: &mut Fitted,
    spec: &ModelSpec,
    run: &RunData,
    targets: &DMatrix<f64>,
    start: usize,
) -> Result<DMatrix<f64>> {
    match fitted {
        Fitted::Bayes(d) => run_decoder(d, &run.features, targets, start, spec.adapt),
        Fitted::Ridge(m) => run_decoder(m, &run.features, targets, start, false),
    }
}

/// Maps target-space predictions for packets `start..N` back to velocity.
///
/// Acceleration is integrated from the true velocity at `start − 1`, and
/// re-anchored on the true velocity preceding each trial start.
fn to_velocity(pred: DMatrix<f64>, run: &RunData, start: usize, mode: PredictionMode) -> Result<DMatrix<f64>> {
    if mode == PredictionMode::Velocity {
        return Ok(pred);
    }
    let n = run.len();
    let anchor = |k: usize| [run.velocity[(k - 1, 0)], run.velocity[(k - 1, 1)]];
    let mut bounds: Vec<usize> = run.trial_starts.iter().copied().filter(|&t| t > start && t < n).collect();
    bounds.sort_unstable();
    bounds.dedup();
    bounds.push(n);
    let mut out = DMatrix::zeros(n - start, 2);
    let mut seg_start = start;
    for seg_end in bounds {
        let a = pred.rows(seg_start - start, seg_end - seg_start).into_owned();
        let v = integrate(&a, anchor(seg_start), run.dt)?;
        out.rows_mut(seg_start - start, seg_end - seg_start).copy_from(&v);
        seg_start = seg_end;
    }
    Ok(out)
}

fn finish(
    run: &RunData,
    kind: ModelKind,
    mode: PredictionMode,
    protocol: Protocol,
    n_calib: usize,
    start: usize,
    pred: DMatrix<f64>,
) -> Result<RunOutcome> {
    let predicted = to_velocity(pred, run, start, mode)?;
    let truth = run.velocity.rows(start, run.len() - start).into_owned();
    let score = nmse(&truth, &predicted)?;
    let report = RunReport {
        subject: run.meta.subject,
        session: run.meta.session,
        condition: run.meta.condition.clone(),
        run: run.meta.run,
        model: kind,
        mode,
        protocol,
        nmse: score,
        n_calib,
        n_eval: run.len() - start,
        wall_time: 0.0,
        v0_policy: V0_POLICY.to_string(),
    };
    Ok(RunOutcome { report, eval_start: start, truth, predicted })
}

fn check_run(run: &RunData) -> Result<()> {
    if run.len() < 4 {
        return Err(Error::RunTooShort(run.len()));
    }
    Ok(())
}

/// Mid-run protocol: calibrate on the first `floor(N/2)` packets and score
/// the rest. Bayes models with `adapt` keep learning from each evaluated
/// packet after predicting it.
pub fn run_protocol(run: &RunData, spec: &ModelSpec, mode: PredictionMode) -> Result<RunOutcome> {
    check_run(run)?;
    require_internal(spec)?;
    let targets = run.targets(mode)?;
    let split = run.split();
    let mut fitted = calibrate(spec, &run.features.rows(0, split).into_owned(), &targets.rows(0, split).into_owned())?;
    let pred = evaluate(&mut fitted, spec, run, &targets, split)?;
    finish(run, spec.kind, mode, Protocol::MidRun, split, split, pred)
}

/// Scores externally produced target-space predictions for the evaluation
/// half (`n_eval×2`, in packet order).
pub fn score_external(run: &RunData, predictions: &DMatrix<f64>, mode: PredictionMode) -> Result<RunOutcome> {
    check_run(run)?;
    let split = run.split();
    if predictions.shape() != (run.len() - split, 2) {
        bail!(
            InvalidInput,
            "expected {}×2 predictions for the evaluation half, got {}×{}",
            run.len() - split,
            predictions.nrows(),
            predictions.ncols()
        );
    }
    finish(run, ModelKind::Eegnet, mode, Protocol::MidRun, split, split, predictions.clone())
}

/// Calibration data accumulated over past sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationHistory {
    stats: SufficientStats,
    x: Vec<DMatrix<f64>>,
    y: Vec<DMatrix<f64>>,
    packets: usize,
}

impl CalibrationHistory {
    pub fn new(dim: usize) -> Self {
        Self { stats: SufficientStats::zeros(dim), x: Vec::new(), y: Vec::new(), packets: 0 }
    }

    pub fn packets(&self) -> usize {
        self.packets
    }

    pub fn is_empty(&self) -> bool {
        self.packets == 0
    }

    pub fn stats(&self) -> &SufficientStats {
        &self.stats
    }

    pub fn add(&mut self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
        self.stats.accumulate(x, y)?;
        self.x.push(x.clone());
        self.y.push(y.clone());
        self.packets += x.nrows();
        Ok(())
    }

    fn concatenated(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let d = self.stats.dim();
        let mut x = DMatrix::zeros(self.packets, d);
        let mut y = DMatrix::zeros(self.packets, 2);
        let mut row = 0;
        for (xi, yi) in self.x.iter().zip(&self.y) {
            x.rows_mut(row, xi.nrows()).copy_from(xi);
            y.rows_mut(row, yi.nrows()).copy_from(yi);
            row += xi.nrows();
        }
        (x, y)
    }

    fn calibrate(&self, spec: &ModelSpec) -> Result<Fitted> {
        require_internal(spec)?;
        if spec.kind.is_bayes() {
            BayesDecoder::from_stats(self.stats.clone(), spec.prior(self.stats.dim())?, spec.bayes).map(Fitted::Bayes)
        } else {
            let (x, y) = self.concatenated();
            fit_ridge(&x, &y, spec.ridge_lambda).map(Fitted::Ridge)
        }
    }
}

/// Session-accumulative protocol over chronologically ordered sessions.
///
/// Runs of the first session use the mid-run protocol. Every later session
/// is decoded by a model calibrated on all runs of the earlier sessions
/// (Bayes from the summed sufficient statistics, ridge refitted on the
/// concatenation) and scored on the second half of each of its runs.
pub fn session_accumulative(
    sessions: &[Vec<RunData>],
    spec: &ModelSpec,
    mode: PredictionMode,
) -> Result<Vec<RunOutcome>> {
    require_internal(spec)?;
    let Some(dim) = sessions.iter().flatten().map(|r| r.features.ncols()).next() else {
        return Ok(Vec::new());
    };
    let mut history = CalibrationHistory::new(dim);
    let mut outcomes = Vec::new();
    for runs in sessions {
        let model = if history.is_empty() { None } else { Some(history.calibrate(spec)?) };
        for run in runs {
            check_run(run)?;
            if run.features.ncols() != dim {
                bail!(InvalidInput, "run {} has {} features, expected {dim}", run.meta, run.features.ncols());
            }
            let outcome = match &model {
                None => run_protocol(run, spec, mode)?,
                Some(model) => {
                    let targets = run.targets(mode)?;
                    let split = run.split();
                    let mut fitted = model.clone();
                    let pred = evaluate(&mut fitted, spec, run, &targets, split)?;
                    finish(run, spec.kind, mode, Protocol::SessionAccumulative, history.packets(), split, pred)?
                }
            };
            outcomes.push(outcome);
        }
        for run in runs {
            history.add(&run.features, &run.targets(mode)?)?;
        }
    }
    Ok(outcomes)
}
