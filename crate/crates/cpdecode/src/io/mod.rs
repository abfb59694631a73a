//! File formats: dataset runs, stream containers, CSV mirrors, reports and
//! the prediction-exchange file.

pub mod container;
pub mod exchange;
pub mod mat;
pub mod reports;
pub mod tables;

pub use container::{export_streams, import_streams, StreamBundle, CONTAINER_VERSION};
pub use exchange::{read_predictions, write_predictions};
pub use mat::{load_run, parse_run_name, KeyMap, RunRecord};
