//! Crate-wide error type.

/// Errors surfaced by the estimation pipeline and its building blocks.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A point is behind or on the camera plane and cannot be projected.
    #[error("non-positive depth: camera-frame z = {z:.6e} m")]
    NonPositiveDepth { z: f64 },

    /// Rigid alignment was asked to fit collinear or duplicated points.
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    /// A grid probe was configured with too many nodes.
    #[error("grid too large: {nodes} nodes exceeds limit {limit}")]
    GridTooLarge { nodes: u128, limit: u64 },

    /// A cluster does not contain candidates for enough distinct keypoints.
    #[error("insufficient keypoints: cluster {cluster_id} has candidates for {available} keypoint ids, need at least 3")]
    InsufficientKeypoints { cluster_id: usize, available: usize },

    /// An ICP iteration found no scene point within the correspondence cutoff.
    #[error("no correspondences within {cutoff} m at ICP iteration {iteration}")]
    NoCorrespondences { iteration: usize, cutoff: f64 },

    /// Rejection sampling could not place the requested instances in the bin.
    #[error("placement failure after {attempts} attempts: bin too small for {instances} instances")]
    PlacementFailure { attempts: usize, instances: usize },

    /// A domain invariant was violated by input data.
    #[error("validation failure: {0}")]
    ValidationFailure(String),

    /// A file could not be parsed.
    #[error("parse error in {path} at {location}: {message}")]
    ParseError {
        path: String,
        location: String,
        message: String,
    },

    /// A file declares an unsupported schema version or magic.
    #[error("schema mismatch in {path}: expected {expected}, found {found}")]
    SchemaMismatch {
        path: String,
        expected: String,
        found: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-parsable tag for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonPositiveDepth { .. } => "NonPositiveDepth",
            Error::DegenerateConfiguration(_) => "DegenerateConfiguration",
            Error::GridTooLarge { .. } => "GridTooLarge",
            Error::InsufficientKeypoints { .. } => "InsufficientKeypoints",
            Error::NoCorrespondences { .. } => "NoCorrespondences",
            Error::PlacementFailure { .. } => "PlacementFailure",
            Error::ValidationFailure(_) => "ValidationFailure",
            Error::ParseError { .. } => "ParseError",
            Error::SchemaMismatch { .. } => "SchemaMismatch",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
