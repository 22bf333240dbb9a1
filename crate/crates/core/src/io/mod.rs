//! Configuration, checkpoints and the mode runners behind the command line.

pub mod checkpoint;
pub mod config;
pub mod run;

pub use config::{parse_config, AnalysisCheck, Initial, Mode, RunConfig};
pub use run::{configure_threads, run, RunSummary};
