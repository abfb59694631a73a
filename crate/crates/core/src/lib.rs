//! Online Bayesian decoding of continuous-pursuit cursor kinematics from
//! multichannel EEG bandpower.
//!
//! The crate is `no_std` (it needs `alloc`) and covers the pure numerics:
//!
//! - [`signal`]: zero-phase decimation, sliding-window packetization, Welch
//!   bandpower, common average reference and exponential moving
//!   standardization.
//! - [`labels`]: position-error / velocity labels, resampling onto packet
//!   timestamps, stream alignment and the acceleration ↔ velocity pair.
//! - [`bayes`]: the online Bayesian decoder with isotropic or ARD prior,
//!   forgetting-factor statistics and empirical-Bayes hyperparameter steps.
//! - [`ridge`]: the standardized closed-form ridge baseline.
//! - [`eval`]: the mid-run and session-accumulative protocols, NMSE and
//!   report aggregation.
//!
//! File formats, dataset loading, synthetic data and the command line live
//! in the `cpdecode` crate.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bayes;
mod error;
pub mod eval;
pub mod labels;
pub mod ridge;
pub mod signal;
pub mod snapshot;

#[cfg(test)]
mod testutil;

pub use bayes::{BayesConfig, BayesDecoder, Prior, SufficientStats};
pub use error::{Error, Result};
pub use eval::{ModelKind, ModelSpec, PredictionMode, RunData, RunMeta, RunReport};
pub use labels::{LabelMode, LabelSource, LabelStream, Trajectory};
pub use ridge::RidgeModel;
pub use signal::{BandSpec, PacketStream, PacketizerConfig};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
