//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("duplicate date {0}")]
    DuplicateDate(chrono::NaiveDate),

    #[error("no common dates across panels")]
    EmptyIntersection,

    #[error("non-positive value in series {series} at {date}: {value}")]
    NonPositive {
        series: String,
        date: chrono::NaiveDate,
        value: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("optimizer failed to converge: {0}")]
    NonConvergence(String),

    #[error("root finder failed to converge: {0}")]
    RootFinding(String),

    #[error("edge fit failed for {edge}: {message}")]
    EdgeFit { edge: String, message: String },

    #[error("invalid vine structure: {0}")]
    Structure(String),

    #[error("artifact format error: {0}")]
    Format(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
