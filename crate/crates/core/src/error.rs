use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("label mismatch in {what} at index {index}: expected `{expected}`, found `{found}`")]
    Label {
        what: &'static str,
        index: usize,
        expected: String,
        found: String,
    },

    #[error("probability out of range at {what}[{row}, {col}]: {value}")]
    Probability {
        what: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("index {index} out of range for {what} of length {len}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("unknown letter code `{code}` at cell ({row}, {col})")]
    UnknownCode {
        code: String,
        row: usize,
        col: usize,
    },

    #[error("no scored cells: every held-out answer is missing")]
    NoScoredCells,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("not enough eligible entries: requested {requested}, eligible {eligible}")]
    NotEnoughEntries { requested: usize, eligible: usize },

    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {diff}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("instance too large for exhaustive enumeration: {0} states")]
    TooLarge(f64),

    #[error("statistics: {0}")]
    Stats(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
