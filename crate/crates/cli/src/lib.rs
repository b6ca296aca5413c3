//! Configuration, scenarios and the end-to-end pipeline behind the
//! `wanframe` binary.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod scenarios;

pub use config::{ConfigError, ConstructionMode, PipelineConfig};
pub use pipeline::{run_pipeline, Check, PipelineError, PipelineOutcome, PipelineReport};
pub use report::write_artifacts;
