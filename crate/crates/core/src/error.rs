use thiserror::Error;

use crate::geometry::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem specification: {0}")]
    InvalidSpec(ValidationReport),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("neck index {index} out of range (problem has {count} necks)")]
    NeckIndex { index: usize, count: usize },

    #[error("coincident points: |x - z| = {distance:e} is below 1e-14")]
    CoincidentPoints { distance: f64 },

    #[error("evaluation point too close to window {window}: distance {distance:.3e} < guard {guard:.3e}")]
    TooCloseToWindow {
        window: usize,
        distance: f64,
        guard: f64,
    },

    #[error("singular linear system: {context}")]
    Singular { context: String },

    #[error("ill-conditioned system: condition estimate {condition:.3e} exceeds {limit:.1e}")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("{method} requires {requirement}")]
    Unsupported {
        method: &'static str,
        requirement: String,
    },

    #[error("statistics too noisy: {0}")]
    InsufficientSamples(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_)
                | Error::InvalidArgument(_)
                | Error::NeckIndex { .. }
                | Error::CoincidentPoints { .. }
                | Error::TooCloseToWindow { .. }
                | Error::Unsupported { .. }
                | Error::Json(_)
        )
    }
}
