//! Errors surfaced by the CLI, with their exit codes.

use std::fmt;
use std::path::Path;

use polyshrink::Error;

use crate::config::ConfigError;

pub const EXIT_IO: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERICAL, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } => EXIT_IO,
            e if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::validation(format!("config: {e}"))
    }
}
