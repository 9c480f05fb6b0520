use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid hyperparameters or configuration values.
    #[error("configuration error: {0}")]
    Config(String),

    /// Inputs violating an operation's preconditions.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A calibrator could not be fitted (e.g. only one label class present).
    #[error("fit error: {0}")]
    Fit(String),

    /// Missing or unknown columns / fields.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("synthetic data generation: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    TomlWrite(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
