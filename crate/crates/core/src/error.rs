use thiserror::Error;

use crate::hw::{ConvergenceReport, HWState};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0} (only 2 and 3 are supported)")]
    UnsupportedDimension(usize),

    #[error("form degree {degree} out of range for dimension {dim}")]
    DegreeOutOfRange { dim: usize, degree: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("metric is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("singular frame at node {node} (x = {coords:?}, det = {det:e})")]
    SingularFrame { node: usize, coords: Vec<f64>, det: f64 },

    #[error("degenerate element {element} (volume = {volume:e})")]
    DegenerateElement { element: usize, volume: f64 },

    #[error("inadmissible state: element {element} has J = {jacobian:e}")]
    Inadmissible { element: usize, jacobian: f64 },

    #[error("singular KKT matrix in the {block} block (pivot {pivot})")]
    SingularKkt { block: String, pivot: usize },

    #[error("Newton solver did not converge: {reason}")]
    NonConvergence { reason: String, report: Box<ConvergenceReport>, state: Box<HWState> },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }
}
