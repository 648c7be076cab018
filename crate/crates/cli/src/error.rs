use ttpce::Error as CoreError;

/// Errors surfaced by the command-line tool, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("oracle error: {0}")]
    Oracle(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Oracle(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Usage(m) | CoreError::Validation(m) | CoreError::Capacity(m) => CliError::Config(m),
            CoreError::Json(e) => CliError::Config(e.to_string()),
            CoreError::Numerical(m) => CliError::Numerical(m),
            CoreError::Oracle(m) => CliError::Oracle(m),
            CoreError::Internal(m) => CliError::Io(format!("internal: {m}")),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
