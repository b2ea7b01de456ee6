//! Command-line front end for the `gfnoma` SER experiments: configuration
//! parsing, CSV output and the oracle self-test.

pub mod config;
mod output;
mod selftest;

use gfnoma_core::Error;

pub use output::{emit_csv, summary, write_csv, CSV_HEADER};
pub use selftest::{selftest, CheckStatus, SelftestOptions, SelftestReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("self-test failed: {0}")]
    Selftest(String),
}

impl CliError {
    /// Validation failures of a parsed configuration.
    pub(crate) fn from_validation(e: Error) -> Self {
        match e {
            Error::InvalidConfig { .. } | Error::InfeasibleScenario(_) | Error::Domain { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Selftest(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
