use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or inconsistent input; exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// A model, fit or search failed on valid input; exit code 3.
    #[error("computation failed: {0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 3,
        }
    }
}

impl From<cavmem::Error> for CliError {
    fn from(e: cavmem::Error) -> Self {
        match e {
            cavmem::Error::Domain(_) | cavmem::Error::Parse { .. } => CliError::Config(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
