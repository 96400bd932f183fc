//! Library side of the `clothground` command: configuration, stages and the
//! end-to-end pipeline.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod stages;

pub use config::{ConfigError, PipelineConfig, StageToggles};
pub use error::CliError;
pub use pipeline::{run_pipeline, PipelineOutcome};
