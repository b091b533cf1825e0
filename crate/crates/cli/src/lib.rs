//! Batch experiment driver: experiment specifications, presets, a grid
//! runner with per-cell failure isolation, and CSV output.

pub mod experiments;
pub mod presets;
pub mod runner;
pub mod spec;

pub use runner::{run, RunOutput, Summary};
pub use spec::ExperimentSpec;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("spec error: {0}")]
    Spec(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Build identifier recorded in every output row.
pub const BUILD_ID: &str = env!("HCTREE_BUILD_ID");
