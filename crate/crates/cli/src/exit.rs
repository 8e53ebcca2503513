//! Error classes and their process exit codes.

use std::fmt;

/// Exit code 1: bad flags or configuration.
pub const EXIT_USAGE: u8 = 1;
/// Exit code 2: a contract or data error raised while running.
pub const EXIT_CONTRACT: u8 = 2;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Contract(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(e: aggnet::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_USAGE,
            CliError::Contract(_) => EXIT_CONTRACT,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Contract(m) => write!(f, "{m}"),
        }
    }
}

impl From<aggnet::Error> for CliError {
    fn from(e: aggnet::Error) -> Self {
        match e {
            aggnet::Error::Config(m) => CliError::Config(m),
            other => CliError::Contract(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Contract(e.to_string())
    }
}
