//! Command-line plumbing: datasets, configuration files, reports and run manifests.
//!
//! Exit codes are part of the interface:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | a verification check failed |
//! | 2 | schema or usage error (missing column, bad flag, bad config) |
//! | 3 | numeric failure, with the offending row when there is one |

pub mod cli;
pub mod config;
pub mod dataset;
pub mod manifest;
pub mod report;
pub mod verify;

use thiserror::Error;

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("numeric error{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Numeric { row: Option<usize>, message: String },

    #[error("verification failed: {}", .0.join(", "))]
    VerifyFailed(Vec<String>),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Schema(_) | HarnessError::Io(_) => EXIT_SCHEMA,
            HarnessError::Numeric { .. } => EXIT_NUMERIC,
            HarnessError::VerifyFailed(_) => EXIT_VERIFY,
        }
    }
}

impl From<Error> for HarnessError {
    fn from(e: Error) -> Self {
        if e.is_numeric() {
            HarnessError::Numeric {
                row: e.row(),
                message: e.to_string(),
            }
        } else {
            HarnessError::Schema(e.to_string())
        }
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Schema(format!("csv: {e}"))
    }
}
