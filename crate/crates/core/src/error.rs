use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-physical covariance matrix: det = {det} < 1/4")]
    NonPhysical { det: f64 },

    #[error("singular matrix (det = {det})")]
    Singular { det: f64 },

    #[error("integration box too narrow: tail mass {tail_mass:e} exceeds {limit:e}")]
    Coverage { tail_mass: f64, limit: f64 },

    #[error("quadrature did not converge within {panels} panels per axis")]
    QuadratureDiverged { panels: usize },

    #[error("insufficient data: need at least {required} samples, got {got}")]
    InsufficientData { required: usize, got: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("unphysical bath: {0}")]
    UnphysicalBath(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable tag, used by the CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::NonPhysical { .. } => "non_physical",
            Error::Singular { .. } => "singular",
            Error::Coverage { .. } => "coverage",
            Error::QuadratureDiverged { .. } => "quadrature_diverged",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::DegenerateSample(_) => "degenerate_sample",
            Error::UnphysicalBath(_) => "unphysical_bath",
            Error::Unsupported(_) => "unsupported",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }
}
