use std::fmt;

use samp_bench::BenchError;
use samp_core::SampError;

/// Failure of a command, carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or input data.
    Input(String),
    /// The computation itself failed.
    Numerical(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<SampError> for CliError {
    fn from(e: SampError) -> Self {
        match e {
            SampError::Decomposition(_) | SampError::IllConditioned(_) | SampError::Flagged(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Core(inner) => inner.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
