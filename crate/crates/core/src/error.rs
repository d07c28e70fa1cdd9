use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("weather data is missing {} date(s) in range: {}", .0.len(), .0.join(", "))]
    WeatherGap(Vec<String>),

    #[error("invalid value in row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("{family} fit did not converge after {iterations} iterations (last change {last_change:e})")]
    NonConvergence {
        family: &'static str,
        iterations: usize,
        last_change: f64,
        last_beta: Vec<f64>,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("artifact checksum mismatch: {0}")]
    Checksum(String),

    #[error("unsupported artifact version {found} (this build reads {supported})")]
    Version { found: String, supported: String },

    #[error("artifact error: {0}")]
    Artifact(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Coarse classification used for process exit codes and API errors.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::Singular(_) | Error::NonConvergence { .. } | Error::Degenerate(_) => {
                ErrorKind::Numeric
            }
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}
