use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("catalog: {0}")]
    Catalog(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("config: {0}")]
    Config(String),
    #[error("labels: {0}")]
    Labels(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("benchmark: {0}")]
    Benchmark(String),
    #[error("dbms: {0}")]
    Dbms(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for malformed-input failures (bad corpus/catalog/scenario/config files),
    /// false for environment failures (DBMS, benchmark, IO).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Catalog(_)
                | Error::Corpus(_)
                | Error::Config(_)
                | Error::Labels(_)
                | Error::Scenario(_)
                | Error::Checkpoint(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
