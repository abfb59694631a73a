//! Online Bayesian multi-output linear regression.
//!
//! The decoder keeps the sufficient statistics `Sxx = XᵀX` and `Sxy = XᵀY` of
//! everything it has seen, discounted by a forgetting factor `λ` at each
//! mini-batch update, and reads its weights off the posterior mean
//! `W = (Sxx + σ²A)⁻¹ Sxy`. The prior precision `A` is either `αI`
//! (isotropic) or `diag(α_j)` (automatic relevance determination). After
//! each mini-batch a small empirical-Bayes step nudges `σ²` towards the
//! batch residual power and `α` towards `γ / w̄²`, where `γ_j = 1 − α_j Σ_jj`
//! is the effective number of parameters under a diagonal posterior
//! covariance approximation.
//!
//! A per-axis residual variance `R` is tracked alongside for monitoring; it
//! does not feed the weight solve.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::snapshot::{Snapshot, SnapshotValue};

/// Eigenvalues of `Sxx + σ²A` at or below this are dropped from the pseudoinverse.
pub const EIGEN_FLOOR: f64 = 1e-10;
/// Lower bound on `w̄²_j` before it divides the precision target.
pub const WEIGHT_POWER_FLOOR: f64 = 1e-12;
pub const ALPHA_MIN: f64 = 1e-6;
pub const ALPHA_MAX: f64 = 1e6;

/// Gaussian prior precision on the weight rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "alpha", rename_all = "snake_case")]
pub enum Prior {
    Isotropic(f64),
    Ard(Vec<f64>),
}

impl Prior {
    pub fn isotropic(alpha: f64) -> Self {
        Prior::Isotropic(alpha)
    }

    pub fn ard(dim: usize, alpha: f64) -> Self {
        Prior::Ard(vec![alpha; dim])
    }

    #[inline]
    pub fn precision(&self, j: usize) -> f64 {
        match self {
            Prior::Isotropic(a) => *a,
            Prior::Ard(a) => a[j],
        }
    }

    pub fn is_ard(&self) -> bool {
        matches!(self, Prior::Ard(_))
    }

    /// Per-feature precisions expanded to length `dim`.
    pub fn precisions(&self, dim: usize) -> Vec<f64> {
        (0..dim).map(|j| self.precision(j)).collect()
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let ok = match self {
            Prior::Isotropic(a) => *a > 0.0 && a.is_finite(),
            Prior::Ard(a) => {
                if a.len() != dim {
                    bail!(InvalidConfig, "ARD prior has {} precisions for {dim} features", a.len());
                }
                a.iter().all(|v| *v > 0.0 && v.is_finite())
            }
        };
        if !ok {
            bail!(InvalidConfig, "prior precisions must be positive and finite");
        }
        Ok(())
    }
}

/// `(XᵀX, XᵀY)` accumulated over observed packets.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub sxx: DMatrix<f64>,
    pub sxy: DMatrix<f64>,
}

impl SufficientStats {
    pub fn zeros(dim: usize) -> Self {
        Self { sxx: DMatrix::zeros(dim, dim), sxy: DMatrix::zeros(dim, 2) }
    }

    pub fn from_data(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        let mut s = Self::zeros(x.ncols());
        s.accumulate(x, y)?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.sxx.nrows()
    }

    /// Adds `XᵀX` and `XᵀY` without discounting.
    pub fn accumulate(&mut self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
        self.forget_and_add(1.0, x, y)
    }

    /// `Sxx ← λSxx + XᵀX`, `Sxy ← λSxy + XᵀY`.
    pub fn forget_and_add(&mut self, lambda: f64, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
        check_design(x, y, self.dim())?;
        self.sxx.gemm_tr(1.0, x, x, lambda);
        self.sxy.gemm_tr(1.0, x, y, lambda);
        // gemm accumulates the two triangles in different orders
        symmetrize(&mut self.sxx);
        Ok(())
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn check_design(x: &DMatrix<f64>, y: &DMatrix<f64>, dim: usize) -> Result<()> {
    if x.ncols() != dim {
        bail!(InvalidConfig, "design has {} features, expected {dim}", x.ncols());
    }
    if y.ncols() != 2 || y.nrows() != x.nrows() {
        bail!(InvalidInput, "targets must be {}×2, got {}×{}", x.nrows(), y.nrows(), y.ncols());
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        bail!(InvalidInput, "non-finite values in design or targets");
    }
    Ok(())
}

fn regularized(stats: &SufficientStats, sigma2: f64, prior: &Prior) -> DMatrix<f64> {
    let mut m = stats.sxx.clone();
    for j in 0..m.nrows() {
        m[(j, j)] += sigma2 * prior.precision(j);
    }
    m
}

/// Posterior mean `(Sxx + σ²A)⁻¹ Sxy`.
///
/// Solved by Cholesky; if the system is not numerically positive definite
/// a least-squares pseudoinverse solve is used instead.
pub fn solve_map(stats: &SufficientStats, sigma2: f64, prior: &Prior) -> Result<DMatrix<f64>> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        bail!(InvalidConfig, "noise variance must be positive, got {sigma2}");
    }
    prior.validate(stats.dim())?;
    if stats.sxx.iter().chain(stats.sxy.iter()).any(|v| !v.is_finite()) {
        bail!(InvalidInput, "non-finite sufficient statistics");
    }
    let m = regularized(stats, sigma2, prior);
    if let Some(chol) = m.clone().cholesky() {
        let w = chol.solve(&stats.sxy);
        if w.iter().all(|v| v.is_finite()) {
            return Ok(w);
        }
    }
    m.svd(true, true)
        .solve(&stats.sxy, EIGEN_FLOOR)
        .map_err(|e| Error::Numerical(format!("pseudoinverse solve failed: {e}")))
}

/// Diagonal of the pseudoinverse of the symmetric matrix `m`.
pub fn pinv_diagonal(m: DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut diag = vec![0.0; n];
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > EIGEN_FLOOR {
            let col = eig.eigenvectors.column(i);
            for j in 0..n {
                diag[j] += col[j] * col[j] / ev;
            }
        }
    }
    diag
}

/// Streaming PSD-noise tracker update: `R ← (1−β)R + β·clip(r², R_min, R_max)`.
pub fn update_noise(r_est: &mut [f64; 2], residual: [f64; 2], beta: f64, r_min: f64, r_max: f64) {
    for c in 0..2 {
        let sq = (residual[c] * residual[c]).clamp(r_min, r_max);
        r_est[c] = (1.0 - beta) * r_est[c] + beta * sq;
    }
}

/// Decoder hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesConfig {
    pub sigma2_init: f64,
    /// Forgetting factor `λ` applied at each mini-batch update.
    pub forgetting: f64,
    /// Mini-batch size `K` in packets.
    pub update_interval: usize,
    pub beta_r: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Initial prior precision for every feature.
    pub alpha_init: f64,
    /// Run the empirical-Bayes step after each update.
    pub empirical_bayes: bool,
}

impl Default for BayesConfig {
    fn default() -> Self {
        Self {
            sigma2_init: 0.01,
            forgetting: 0.98,
            update_interval: 50,
            beta_r: 0.05,
            r_min: 0.001,
            r_max: 1.0,
            alpha_init: 1.0,
            empirical_bayes: true,
        }
    }
}

impl BayesConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2_init > 0.0) {
            bail!(InvalidConfig, "sigma2_init must be positive");
        }
        if !(self.forgetting >= 0.0 && self.forgetting <= 1.0) {
            bail!(InvalidConfig, "forgetting factor must lie in [0, 1], got {}", self.forgetting);
        }
        if self.update_interval == 0 {
            bail!(InvalidConfig, "update interval must be at least 1 packet");
        }
        if !(self.beta_r > 0.0 && self.beta_r < 1.0) {
            bail!(InvalidConfig, "beta_r must lie in (0, 1)");
        }
        if !(self.r_min > 0.0 && self.r_min <= self.r_max) {
            bail!(InvalidConfig, "need 0 < r_min <= r_max");
        }
        if !(self.alpha_init > 0.0) {
            bail!(InvalidConfig, "alpha_init must be positive");
        }
        Ok(())
    }
}

/// Online Bayesian decoder state.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesDecoder {
    weights: DMatrix<f64>,
    sigma2: f64,
    prior: Prior,
    stats: SufficientStats,
    config: BayesConfig,
    noise: [f64; 2],
    // pending mini-batch, row-major K×D, with the residuals seen at observe time
    buf_x: Vec<f64>,
    buf_y: Vec<[f64; 2]>,
    buf_r: Vec<[f64; 2]>,
    updates: usize,
}

impl BayesDecoder {
    /// Fits on calibration data `X` (`N×D`) and `Y` (`N×2`).
    pub fn fit(x: &DMatrix<f64>, y: &DMatrix<f64>, prior: Prior, config: BayesConfig) -> Result<Self> {
        prior.validate(x.ncols())?;
        let stats = SufficientStats::from_data(x, y)?;
        Self::from_stats(stats, prior, config)
    }

    /// Builds a decoder directly from accumulated statistics.
    pub fn from_stats(stats: SufficientStats, prior: Prior, config: BayesConfig) -> Result<Self> {
        config.validate()?;
        let weights = solve_map(&stats, config.sigma2_init, &prior)?;
        let dim = stats.dim();
        Ok(Self {
            weights,
            sigma2: config.sigma2_init,
            prior,
            stats,
            config,
            noise: [config.sigma2_init.clamp(config.r_min, config.r_max); 2],
            buf_x: Vec::with_capacity(config.update_interval * dim),
            buf_y: Vec::with_capacity(config.update_interval),
            buf_r: Vec::with_capacity(config.update_interval),
            updates: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.stats.dim()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn stats(&self) -> &SufficientStats {
        &self.stats
    }

    pub fn config(&self) -> &BayesConfig {
        &self.config
    }

    /// Tracked per-axis residual variance `R`.
    pub fn noise(&self) -> [f64; 2] {
        self.noise
    }

    pub fn pending(&self) -> usize {
        self.buf_y.len()
    }

    /// Number of completed mini-batch updates.
    pub fn updates(&self) -> usize {
        self.updates
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            bail!(InvalidInput, "feature vector has {} entries, expected {}", x.len(), self.dim());
        }
        if x.iter().any(|v| !v.is_finite()) {
            bail!(InvalidInput, "non-finite feature vector");
        }
        Ok(())
    }

    fn predict_unchecked(&self, x: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            *o = x.iter().zip(self.weights.column(c).iter()).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// `xᵀW` with the weights of the last completed update.
    pub fn predict(&self, x: &[f64]) -> Result<[f64; 2]> {
        self.check_x(x)?;
        Ok(self.predict_unchecked(x))
    }

    /// Records a labelled packet and returns its prediction residual.
    ///
    /// Every `K`-th call folds the buffered mini-batch into the statistics,
    /// re-solves the weights and, if enabled, runs the empirical-Bayes step.
    pub fn observe(&mut self, x: &[f64], y: [f64; 2]) -> Result<[f64; 2]> {
        self.check_x(x)?;
        if !(y[0].is_finite() && y[1].is_finite()) {
            bail!(InvalidInput, "non-finite target");
        }
        let yhat = self.predict_unchecked(x);
        let r = [y[0] - yhat[0], y[1] - yhat[1]];
        update_noise(&mut self.noise, r, self.config.beta_r, self.config.r_min, self.config.r_max);
        self.buf_x.extend_from_slice(x);
        self.buf_y.push(y);
        self.buf_r.push(r);
        if self.buf_y.len() >= self.config.update_interval {
            self.flush()?;
        }
        Ok(r)
    }

    fn flush(&mut self) -> Result<()> {
        let k = self.buf_y.len();
        let xb = DMatrix::from_row_slice(k, self.dim(), &self.buf_x);
        let yb = DMatrix::from_fn(k, 2, |i, c| self.buf_y[i][c]);

        // stage into copies so a numerical failure leaves the state intact
        let mut stats = self.stats.clone();
        stats.forget_and_add(self.config.forgetting, &xb, &yb)?;
        let weights = solve_map(&stats, self.sigma2, &self.prior)?;
        self.stats = stats;
        self.weights = weights;
        if self.config.empirical_bayes {
            let residuals = core::mem::take(&mut self.buf_r);
            self.eb_update(&residuals);
            self.buf_r = residuals;
        }
        self.buf_x.clear();
        self.buf_y.clear();
        self.buf_r.clear();
        self.updates += 1;
        Ok(())
    }

    /// Empirical-Bayes adjustment of `σ²` and the prior from a batch of residuals.
    ///
    /// Uses the current weights and statistics; the adjusted hyperparameters
    /// take effect at the next weight solve.
    pub fn eb_update(&mut self, residuals: &[[f64; 2]]) {
        if !residuals.is_empty() {
            let power = residuals.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum::<f64>() / (2 * residuals.len()) as f64;
            let next = 0.9 * self.sigma2 + 0.1 * power;
            // a zero-residual stream decays σ² geometrically; keep it a valid variance
            if next > 0.0 && next.is_finite() {
                self.sigma2 = next;
            }
        }

        let dim = self.dim();
        let sigma_diag = pinv_diagonal(regularized(&self.stats, self.sigma2, &self.prior));
        let gamma = |alpha: f64, s: f64| (1.0 - alpha * s).clamp(0.0, 1.0);
        let row_power = |j: usize| -> f64 {
            let (a, b) = (self.weights[(j, 0)], self.weights[(j, 1)]);
            0.5 * (a * a + b * b)
        };
        match &mut self.prior {
            Prior::Ard(alpha) => {
                for j in 0..dim {
                    let g = gamma(alpha[j], sigma_diag[j]);
                    let w2 = row_power(j).max(WEIGHT_POWER_FLOOR);
                    alpha[j] = (0.9 * alpha[j] + 0.1 * g / w2).clamp(ALPHA_MIN, ALPHA_MAX);
                }
            }
            Prior::Isotropic(alpha) => {
                if dim == 0 {
                    return;
                }
                let g = sigma_diag.iter().map(|&s| gamma(*alpha, s)).sum::<f64>() / dim as f64;
                let w2 = (self.weights.iter().map(|w| w * w).sum::<f64>() / (2 * dim) as f64).max(WEIGHT_POWER_FLOOR);
                *alpha = (0.9 * *alpha + 0.1 * g / w2).clamp(ALPHA_MIN, ALPHA_MAX);
            }
        }
    }

    /// Adds calibration data without forgetting and re-solves the weights.
    pub fn absorb(&mut self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
        self.stats.accumulate(x, y)?;
        self.weights = solve_map(&self.stats, self.sigma2, &self.prior)?;
        Ok(())
    }

    pub fn to_snapshot(&self) -> Snapshot {
        let dim = self.dim();
        let mut s = Snapshot::new("bayes");
        s.insert("weights", SnapshotValue::matrix(&self.weights));
        s.insert("sxx", SnapshotValue::matrix(&self.stats.sxx));
        s.insert("sxy", SnapshotValue::matrix(&self.stats.sxy));
        s.insert("sigma2", SnapshotValue::Scalar(self.sigma2));
        s.insert(
            "prior_kind",
            SnapshotValue::Text(String::from(if self.prior.is_ard() { "ard" } else { "isotropic" })),
        );
        s.insert("alpha", SnapshotValue::Vector(self.prior.precisions(dim)));
        s.insert("noise", SnapshotValue::Vector(self.noise.to_vec()));
        s.insert("forgetting", SnapshotValue::Scalar(self.config.forgetting));
        s.insert("update_interval", SnapshotValue::Scalar(self.config.update_interval as f64));
        s.insert("sigma2_init", SnapshotValue::Scalar(self.config.sigma2_init));
        s.insert("beta_r", SnapshotValue::Scalar(self.config.beta_r));
        s.insert("r_min", SnapshotValue::Scalar(self.config.r_min));
        s.insert("r_max", SnapshotValue::Scalar(self.config.r_max));
        s.insert("alpha_init", SnapshotValue::Scalar(self.config.alpha_init));
        s.insert("empirical_bayes", SnapshotValue::Scalar(if self.config.empirical_bayes { 1.0 } else { 0.0 }));
        s.insert("updates", SnapshotValue::Scalar(self.updates as f64));
        let k = self.buf_y.len();
        s.insert("buffer_x", SnapshotValue::Matrix { rows: k, cols: dim, data: self.buf_x.clone() });
        s.insert(
            "buffer_y",
            SnapshotValue::Matrix { rows: k, cols: 2, data: self.buf_y.iter().flatten().copied().collect() },
        );
        s.insert(
            "buffer_r",
            SnapshotValue::Matrix { rows: k, cols: 2, data: self.buf_r.iter().flatten().copied().collect() },
        );
        s
    }

    pub fn from_snapshot(s: &Snapshot) -> Result<Self> {
        s.expect_kind("bayes")?;
        let weights = s.matrix("weights")?;
        let stats = SufficientStats { sxx: s.matrix("sxx")?, sxy: s.matrix("sxy")? };
        let dim = stats.dim();
        if weights.shape() != (dim, 2) || stats.sxx.ncols() != dim || stats.sxy.shape() != (dim, 2) {
            bail!(InvalidInput, "snapshot matrices have inconsistent shapes");
        }
        let alpha = s.vector("alpha")?;
        let prior = match s.text("prior_kind")? {
            "ard" => Prior::Ard(alpha.to_vec()),
            "isotropic" => Prior::Isotropic(*alpha.first().ok_or_else(|| Error::InvalidInput("empty alpha".into()))?),
            other => bail!(InvalidInput, "unknown prior kind {other}"),
        };
        prior.validate(dim)?;
        let config = BayesConfig {
            sigma2_init: s.scalar("sigma2_init")?,
            forgetting: s.scalar("forgetting")?,
            update_interval: s.scalar("update_interval")? as usize,
            beta_r: s.scalar("beta_r")?,
            r_min: s.scalar("r_min")?,
            r_max: s.scalar("r_max")?,
            alpha_init: s.scalar("alpha_init")?,
            empirical_bayes: s.scalar("empirical_bayes")? != 0.0,
        };
        config.validate()?;
        let noise = s.vector("noise")?;
        if noise.len() != 2 {
            bail!(InvalidInput, "noise estimate must have 2 entries");
        }
        let pairs = |name: &str| -> Result<Vec<[f64; 2]>> {
            let (rows, cols, data) = s.matrix_parts(name)?;
            if cols != 2 || data.len() != rows * 2 {
                bail!(InvalidInput, "{name} must be k×2");
            }
            Ok(data.chunks(2).map(|c| [c[0], c[1]]).collect())
        };
        let (rows, cols, buf_x) = s.matrix_parts("buffer_x")?;
        let buf_y = pairs("buffer_y")?;
        let buf_r = pairs("buffer_r")?;
        if cols != dim || rows != buf_y.len() || rows != buf_r.len() {
            bail!(InvalidInput, "snapshot buffers have inconsistent shapes");
        }
        Ok(Self {
            weights,
            sigma2: s.scalar("sigma2")?,
            prior,
            stats,
            config,
            noise: [noise[0], noise[1]],
            buf_x: buf_x.to_vec(),
            buf_y,
            buf_r,
            updates: s.scalar("updates")? as usize,
        })
    }
}
