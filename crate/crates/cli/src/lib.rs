//! Configuration, staged pipeline and report emission behind the `seqrpf`
//! binary.
//!
//! A run is described by one TOML [`config::RunConfig`]. The pipeline
//! executes pairing → s-check → rpf → cones → spectral → simulate, caching
//! the Gibbs family and every stage result under `<out>/cache`, and writes
//! a versioned `summary.json` next to the per-stage CSV/JSON artifacts.

pub mod cache;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod stages;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use pipeline::{run_pipeline, PipelineOutcome, Stage};
