use std::path::PathBuf;

use crate::inversion::IterationRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh generation: {0}")]
    MeshGeneration(String),

    #[error("mesh file {path}:{line}: {msg}")]
    MeshFile { path: PathBuf, line: usize, msg: String },

    #[error("mesh transfer: fine element {element} (barycenter {x:.6}, {y:.6}) lies in no coarse element")]
    PointLocation { element: usize, x: f64, y: f64 },

    #[error("invalid electrode layout: {0}")]
    InvalidLayout(String),

    #[error("conductivity value {value} at element {element} outside admissible range [{lo}, {hi}]")]
    NotAdmissible { element: usize, value: f64, lo: f64, hi: f64 },

    #[error("degenerate element {element} with area {area:e}")]
    DegenerateElement { element: usize, area: f64 },

    #[error("current pattern {pattern} sums to {sum:e}, expected 0")]
    UnbalancedCurrent { pattern: usize, sum: f64 },

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension { what: &'static str, expected: usize, got: usize },

    #[error("mesh mismatch: {0}")]
    MeshMismatch(&'static str),

    #[error("forward solve failed: {0}")]
    Factorization(String),

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {relative_residual:e}, tolerance {tolerance:e})")]
    CgNotConverged { iterations: usize, relative_residual: f64, tolerance: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite iterate at outer iteration {k}")]
    NonFinite { k: usize, history: Vec<IterationRecord> },

    #[error("{0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
