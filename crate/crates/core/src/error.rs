use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sensor origin ({x:.3}, {y:.3}, {z:.3}) lies outside the map bounds")]
    OriginOutOfBounds { x: f64, y: f64, z: f64 },

    #[error("empty sweep")]
    EmptySweep,

    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("ray index {index} out of range for a ray of {len} voxels")]
    RayIndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("planner: {0}")]
    Planner(String),

    #[error("empty candidate set")]
    NoCandidates,

    #[error("failed to parse {what}: {reason}")]
    Parse { what: String, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("failed to load mesh {path}: {source}")]
    Mesh {
        path: PathBuf,
        #[source]
        source: tobj::LoadError,
    },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable category, used by the CLI error record.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OriginOutOfBounds { .. } => "origin_out_of_bounds",
            Error::EmptySweep => "empty_sweep",
            Error::ProbabilityOutOfRange(_) => "probability_out_of_range",
            Error::RayIndexOutOfRange { .. } => "ray_index_out_of_range",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Planner(_) => "planner",
            Error::NoCandidates => "no_candidates",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Mesh { .. } => "mesh",
            Error::Step { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
