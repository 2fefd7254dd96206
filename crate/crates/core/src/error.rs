use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("type error at row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Type {
        row: usize,
        column: String,
        value: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("dataset needs at least {required} rows, found {found}")]
    TooFewRows { required: usize, found: usize },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("missing cell in column `{column}` at row {row}")]
    MissingCell { row: usize, column: String },

    #[error("target rule yields a single class")]
    SingleClass,

    #[error("similarity between rows {a} and {b} is undefined: no feature observed in both")]
    UndefinedSimilarity { a: usize, b: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("node {0} has zero total weight")]
    ZeroDegree(usize),

    #[error("rate undefined: {group} group has no {label} instances")]
    UndefinedRate {
        group: &'static str,
        label: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
