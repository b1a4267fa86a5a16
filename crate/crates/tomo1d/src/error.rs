//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by constructors, estimators and experiment drivers.
#[derive(Debug, Error)]
pub enum TomoError {
    /// A routing topology that is not a rooted tree, has too few leaves, etc.
    #[error("malformed topology: {0}")]
    MalformedTopology(String),

    /// Incompatible matrix/vector dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A covariance matrix that should be positive definite is not.
    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    /// The projection design cannot identify the parameters (rank-deficient
    /// curvature or too few projections).
    #[error("non-identifiable design: {0}")]
    NonIdentifiableDesign(String),

    /// A value outside its admissible domain (nonpositive variance, weight
    /// outside the simplex, non-finite sample, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A distribution with zero spread where a scale is required.
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    /// Config file or CSV/topology input that does not parse.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TomoError>;
