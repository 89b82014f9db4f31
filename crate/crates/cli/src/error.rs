use std::fmt;
use std::path::Path;

/// A failed command; the variant picks the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unusable input: exit 2.
    Usage(String),
    /// Unreadable or unwritable files: exit 3.
    Io(String),
    /// Posteriorgram built for a different alphabet: exit 4.
    Checksum(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Checksum(_) => 4,
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Checksum(m) => f.write_str(m),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
