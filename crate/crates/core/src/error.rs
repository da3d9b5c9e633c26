//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's domain (non-positive radius,
    /// zero time step, pixel outside the image, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A data file (map, cloud, detections, log) did not match its format.
    #[error("format error: {0}")]
    Format(String),

    /// Scenario configuration is missing, malformed or inconsistent.
    #[error("scenario error: {0}")]
    Scenario(String),

    /// The ground-plane fit found no usable plane.
    #[error("no ground plane found")]
    NoGroundPlane,

    /// A cluster is too small for feature extraction.
    #[error("cluster needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    /// The filter produced a non-finite state or covariance.
    #[error("numerical failure at t={t:.3}s: {detail}")]
    Numerical { t: f64, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("scenario parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn scenario(msg: impl Into<String>) -> Self {
        Error::Scenario(msg.into())
    }
}
