use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter outside domain: {0}")]
    Domain(String),
    #[error("fit failed: {msg}")]
    Fit {
        msg: String,
        best: Vec<f64>,
        loglik: f64,
    },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("invalid vine array: {0}")]
    Structure(String),
    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),
    #[error("unsupported case: {0}")]
    Unsupported(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("rank deficient design: {0}")]
    Rank(String),
    #[error("AUC undefined: {0}")]
    UndefinedAuc(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the input data or files rather than by numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::DegenerateData(_)
                | Error::Structure(_)
                | Error::UnsupportedStructure(_)
                | Error::Input(_)
                | Error::Schema(_)
                | Error::UndefinedAuc(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
