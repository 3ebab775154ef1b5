//! Experiment driver: configuration files, presets, and the `run`,
//! `simulate`, `forecast`, `evaluate`, `sweep-sparsity` and `compare-rff`
//! pipelines.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod presets;

use radial_kernels::Error;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig, RawConfig};
pub use pipeline::Experiment;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Error,
    },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    /// 2 for configuration, parse and I/O problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Stage { source, .. } => match source {
                Error::Input(_) | Error::Config(_) | Error::State(_) | Error::Parse { .. } | Error::Io(_) => 2,
                _ => 3,
            },
        }
    }
}
