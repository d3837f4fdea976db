use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("customer index {index} out of range for {len} customers")]
    CustomerOutOfRange { index: usize, len: usize },

    #[error("decision has length {got}, expected {expected}")]
    DecisionLength { got: usize, expected: usize },

    #[error("decision opens {open} facilities but the budget is {budget}")]
    BudgetExceeded { open: usize, budget: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty utility vector")]
    EmptyInput,

    #[error("enumeration needs {needed} subsets, limit is {limit}")]
    EnumerationLimit { needed: u128, limit: u128 },

    #[error("{0} is undefined for a zero or negative reference value")]
    UndefinedGap(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
