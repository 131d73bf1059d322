use std::fmt;

use clapshot_core::{Error, ErrorKind};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    /// Flags that parse but do not make sense together.
    Usage(String),
    Core(Error),
    /// Outputs were written but some sweep cells failed.
    Cells { failed: usize, kind: ErrorKind },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        let by_kind = |k: ErrorKind| match k {
            ErrorKind::Data => EXIT_DATA,
            ErrorKind::Numeric => EXIT_NUMERIC,
        };
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => by_kind(e.kind()),
            CliError::Cells { kind, .. } => by_kind(*kind),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Cells { failed, .. } => write!(f, "{failed} cell(s) failed; see the status column"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
