//! Pipeline commands and the HTTP service behind the `loadwatch` binary.

pub mod config;
pub mod manifest;
pub mod service;
pub mod stages;

/// Config problems exit with 2, failed stages with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Stage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage(_) => 1,
        }
    }
}
