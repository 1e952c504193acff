use phi_heat::PhiError;

/// Failure classes, each with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad or incomplete configuration: exit 2.
    Validation(String),
    /// The computation ran but failed or produced garbage: exit 3.
    Numerical(String),
    /// Could not read the config or write artifacts: exit 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<PhiError> for CliError {
    fn from(e: PhiError) -> Self {
        match e {
            PhiError::Config(_) | PhiError::Domain(_) => CliError::Validation(e.to_string()),
            PhiError::Io(m) => CliError::Io(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
