use thiserror::Error;

/// Errors surfaced by estimation, identification, and I/O routines.
///
/// The CLI maps these onto process exit codes: configuration and input
/// problems exit 2, missing upstream artifacts exit 3, numerical failures
/// exit 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: matrix is not positive definite")]
    Decomposition { context: String },

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("column {0:?} is degenerate")]
    DegenerateColumn(String),

    #[error("sample too small: {0}")]
    SampleSize(String),

    #[error("estimator failure: {0}")]
    Estimator(String),

    #[error("iteration did not converge: {0}")]
    Convergence(String),

    #[error("normalization failed: {0}")]
    Normalization(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Dimension(_)
            | Error::Domain(_)
            | Error::Config(_)
            | Error::SampleSize(_)
            | Error::DegenerateColumn(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::MissingArtifact(_) => 3,
            Error::Decomposition { .. }
            | Error::DegenerateDensity(_)
            | Error::Estimator(_)
            | Error::Convergence(_)
            | Error::Normalization(_)
            | Error::NotApplicable(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
