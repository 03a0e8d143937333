//! Configuration-driven experiments on top of `polaron-core`: a TOML run
//! file in, CSV tables plus a JSON manifest out, and SVG plots of the tables.

pub mod artifacts;
pub mod config;
pub mod experiments;
pub mod plot;

pub use config::{ConfigError, Experiment, RunConfig};
pub use experiments::{run, RunError, RunSummary};
