use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration or unreadable inputs: exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// A library routine refused the inputs mid-run: exit code 1.
    #[error("run failed: {0}")]
    Run(String),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) | CliError::Output(_) => 1,
        }
    }
}

pub fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}
