//! Dataset ingestion, synthetic data, stream files and the command-line
//! front end around `cpdecode-core`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod ingest;
pub mod io;
pub mod plot;
pub mod synth;

pub use error::{DataError, Result};
pub use ingest::process_run;
pub use synth::{synth_generate, Drift, GroundTruth, SynthConfig};
