use thiserror::Error;

use crate::CellId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("out-of-order timestamp {t} (last processed {last})")]
    OutOfOrder { t: f64, last: f64 },

    #[error("unknown cell {0}")]
    UnknownCell(CellId),

    #[error("cell {0}: {1}")]
    State(CellId, &'static str),

    #[error("objective undefined: {0}")]
    UndefinedObjective(String),

    #[error("no alpha in the search grid reproduces tau0 = {0} as the best partition")]
    NoConsistentAlpha(f64),

    #[error("initialization failed: {0}")]
    Init(String),

    #[error("snapshots were produced by different engines ({0:#x} vs {1:#x})")]
    Provenance(u64, u64),

    #[error("ordering violated: {0}")]
    Ordering(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
