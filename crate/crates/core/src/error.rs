use std::path::PathBuf;

use crate::systems::SystemKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation `{op}` is not defined for {kind:?}")]
    Unsupported { op: &'static str, kind: SystemKind },

    #[error("state has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The requested slice point lies outside the energy shell.
    #[error("point lies outside the energetically allowed region")]
    Infeasible,

    #[error("neighbour stencil leaves the energetically allowed region")]
    StencilInfeasible,

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: &'static str },

    #[error("centre Lagrangian descriptor is zero; D and R are undefined")]
    DegenerateCenter,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("feasible fraction of the sampling box below 1e-4 (energy {energy})")]
    DegenerateEnergy { energy: f64 },

    #[error("histogram is unimodal: no threshold separates two populations")]
    NoThreshold,

    #[error("dataset is untrainable: {0}")]
    Untrainable(String),

    #[error("malformed model document: {0}")]
    MalformedModel(String),

    #[error("model version {found} is not supported (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("recipe mismatch: the model uses {model} but {requested} is required")]
    RecipeMismatch { model: String, requested: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
