//! Crate-wide error type.

use chrono::NaiveDate;
use thiserror::Error;

/// Errors surfaced by the data pipeline and run drivers.
///
/// Expected per-date outcomes (a book that cannot be formed, a leg that
/// cannot be marked) are *not* errors; they are reported through their own
/// result enums so a run can skip the date and keep going.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// Invalid run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A discount/zero curve could not price the requested horizon.
    #[error("no zero rate available on {date} for tau {tau:.6}")]
    MissingRate { date: NaiveDate, tau: f64 },

    /// Residual updates must arrive in strictly increasing date order.
    #[error("out-of-order residual update: {date} does not follow {last}")]
    OutOfOrderUpdate { date: NaiveDate, last: NaiveDate },

    /// Ablation reruns must agree on the evaluation dates.
    #[error("ablation alignment error: {0}")]
    Alignment(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for command-line front ends: 2 for configuration
    /// problems, 3 for anything wrong with the data or its processing.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
