//! Experiment driver behind the `sysaware` binary.

pub mod codec_cmd;
pub mod config;
pub mod manifest;
pub mod run;
pub mod theory;

use std::error::Error as StdError;
use std::path::Path;

use thiserror::Error;

pub use config::{Config, ConfigError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{stage}: {source}")]
    Runtime {
        stage: &'static str,
        #[source]
        source: Box<dyn StdError + Send + Sync>,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime { .. } => 1,
        }
    }
}

/// Tags an error with the stage that produced it.
pub(crate) fn stage<E: StdError + Send + Sync + 'static>(stage: &'static str) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Runtime {
        stage,
        source: Box::new(e),
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(stage("create output directory"))?;
    }
    std::fs::write(path, bytes).map_err(stage("write output"))
}
