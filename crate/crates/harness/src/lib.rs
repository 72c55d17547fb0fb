//! Experiment harness for the matched-filter / variational-search pipeline:
//! synthetic data, experiment configuration and presets, cached quality grids,
//! depth sweeps, and CSV/SVG output.

use thiserror::Error;

pub mod config;
pub mod experiment;
pub mod plot;
pub mod presets;
pub mod synth;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Data(_) => 3,
            HarnessError::Io { .. } => 1,
        }
    }
}
