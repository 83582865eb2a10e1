use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid direction: {0}")]
    InvalidDirection(String),
    #[error("invalid BRDF parameters: {0}")]
    InvalidBrdf(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),
    #[error("degenerate scene: {0}")]
    DegenerateScene(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("empty hemisphere: {0}")]
    EmptyHemisphere(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag, used by the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDirection(_) => "invalid_direction",
            Error::InvalidBrdf(_) => "invalid_brdf",
            Error::Config(_) => "config",
            Error::Geometry(_) => "geometry",
            Error::DegenerateFrame(_) => "degenerate_frame",
            Error::DegenerateScene(_) => "degenerate_scene",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::Empty(_) => "empty",
            Error::EmptyHemisphere(_) => "empty_hemisphere",
            Error::NonFinite(_) => "non_finite",
            Error::Dataset(_) => "dataset",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
