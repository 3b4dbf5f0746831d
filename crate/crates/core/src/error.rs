use std::path::PathBuf;

/// Errors raised by filters, fitting, grids and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("weights are not normalized (sum = {sum})")]
    Unnormalized { sum: f64 },

    #[error("model likelihood for particle {index} is invalid: {value}")]
    InvalidLikelihood { index: usize, value: f64 },

    #[error("fulcrum grid would hold {count} points, above the cap of {cap}")]
    GridTooLarge { count: u128, cap: usize },

    #[error("rank-deficient design matrix; deficient basis columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("fit needs at least {required} points, got {got}")]
    TooFewPoints { required: usize, got: usize },

    #[error("all abscissae are identical ({x}); nothing to fit")]
    DegenerateAbscissae { x: f64 },

    #[error("interval {index} [{lo}, {hi}] holds {got} points, needs at least {required}")]
    UnderpopulatedInterval { index: usize, lo: f64, hi: f64, got: usize, required: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }

    /// Short machine-readable category, used by the CLI's error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Unnormalized { .. } => "unnormalized",
            Error::InvalidLikelihood { .. } => "likelihood",
            Error::GridTooLarge { .. } => "grid-cap",
            Error::RankDeficient { .. } => "rank-deficient",
            Error::TooFewPoints { .. } => "too-few-points",
            Error::DegenerateAbscissae { .. } => "degenerate-abscissae",
            Error::UnderpopulatedInterval { .. } => "underpopulated-interval",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::InvalidArgument(_) => "argument",
            Error::Config { .. } => "config",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
