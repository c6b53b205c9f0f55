use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("schema error at header column {index}: found `{found}`, expected `{expected}`")]
    Schema {
        index: usize,
        found: String,
        expected: String,
    },

    #[error("line {line}, column `{column}`: {message}")]
    Row {
        line: u64,
        column: String,
        message: String,
    },

    #[error("line {line}: {message}")]
    Validation { line: u64, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("transport error after {retries} retries: {message}")]
    Transport { retries: u32, message: String },

    #[error("authentication rejected by server (HTTP {status})")]
    Auth { status: u16 },

    #[error("project `{0}` not found on server")]
    NotFound(String),

    #[error("server returned HTTP {status}")]
    Http { status: u16 },

    #[error("malformed server response: {0}")]
    Decode(String),
}
