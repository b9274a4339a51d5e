use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid body force: {0}")]
    InvalidForce(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The margin stays positive on the probe range: not a Model II law.
    #[error("margin has no root on [0, {q_probe_max}]: not a Model II law")]
    NoEllipticityLoss { q_probe_max: f64 },

    /// `b1 + 2 c1 >= 0` puts the material in the front regime where no
    /// small homoclinic exists.
    #[error("front regime (b1 + 2 c1 = {sum}): no homoclinic seed")]
    FrontRegime { sum: f64 },

    #[error("planar trajectory diverged near X = {x}")]
    Divergence { x: f64 },

    /// Model II assembly guard: a sampled half-point gradient reached the
    /// ellipticity-loss shear.
    #[error("ellipticity exceeded at ({x}, {y}): |grad u|^2 = {q} >= q1 = {q1}")]
    EllipticityExceeded { x: f64, y: f64, q: f64, q1: f64 },

    #[error("linear solve singular at column {column}: fold or ellipticity loss suspected")]
    SingularSystem { column: usize },

    #[error("Newton did not converge in {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("step too large: backtracking exhausted at residual {residual:.3e}")]
    StepTooLarge { residual: f64 },

    #[error("no nontrivial transversal state at lambda = {lambda}")]
    NoTransversalState { lambda: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Every validation problem found in a run configuration, not just the first.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    ConfigValidation(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
