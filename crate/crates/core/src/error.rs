use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("code format error at line {line}: {msg}")]
    CodeFormat { line: usize, msg: String },
    #[error("invalid exponent {value} at ({row}, {col}) for lift size {lift}")]
    InvalidExponent {
        row: usize,
        col: usize,
        value: i64,
        lift: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid layer permutation: {0}")]
    InvalidPermutation(String),
    #[error("invalid decoder configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid channel parameters: {0}")]
    InvalidChannel(String),
    #[error("not a leafless elementary trapping set: {0}")]
    NotLets(String),
    #[error("enumeration exceeded the state budget of {0}")]
    BudgetExceeded(u64),
    #[error("invalid state labeling: {0}")]
    InvalidLabeling(String),
    #[error("quantization grid does not cover the saturation level: {0}")]
    GridRange(String),
    #[error("density evolution diverged: {0}")]
    DeDivergence(String),
    #[error("eigen solver did not converge: {0}")]
    EigenConvergence(String),
    #[error("schedule space too large: {0}")]
    ScheduleSpaceTooLarge(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
