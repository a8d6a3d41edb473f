use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid flags or configuration; nothing was computed.
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Run(ldscope::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}
