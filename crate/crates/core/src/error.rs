use thiserror::Error;

/// Errors raised by the estimators, samplers and file formats in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid learner or pipeline parameters.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A computation would exceed a configured resource cap.
    #[error("resource error: {0}")]
    Resource(String),

    /// An internal invariant was broken, usually because a caller contract was not honoured.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// A covariance or frame estimate is numerically degenerate.
    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    /// Quadrature failed to converge or detected a divergent integral.
    #[error("quadrature error: {0}")]
    Quadrature(String),

    /// The evaluation box misses a noticeable part of a density's mass.
    #[error("coverage error: {0}")]
    Coverage(String),

    /// The operation needs a density evaluator that is not available.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A rejection sampler stalled; the caller should discard the frame or candidate.
    #[error("rejection sampler stalled after {trials} trials")]
    Stalled { trials: u64 },

    /// No usable candidate survived; per-frame diagnostics are attached.
    #[error("pipeline failure: {message}")]
    PipelineFailure {
        message: String,
        diagnostics: Vec<String>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
