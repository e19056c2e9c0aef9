use nalgebra::DVector;
use thiserror::Error;

/// Errors raised by the stratification toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid {kind}: {reason}")]
    InvalidElement { kind: &'static str, reason: String },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        best: DVector<f64>,
        residual: f64,
        iterations: usize,
    },

    #[error("field is not equivariant (residual {residual:e})")]
    NotEquivariant { residual: f64 },

    #[error("lattice spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),

    #[error("path step {index} from site {from} to site {to} is not a lattice edge")]
    NonAdjacentStep {
        index: usize,
        from: usize,
        to: usize,
    },

    #[error("holonomy generator {generator} moves the seed vector (residual {residual:e})")]
    HolonomyObstruction { generator: usize, residual: f64 },

    #[error("stabilizer section moves the connection (residual {residual:e})")]
    StabilizerMismatch { residual: f64 },

    #[error("stability indicator does not change sign on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("reduced minimum sits on the boundary at t = {t}")]
    NoInteriorMinimum { t: f64, value: f64 },

    #[error("branch jump at lambda = {lambda} (step {distance:e} exceeds bound {bound:e})")]
    BranchJump {
        lambda: f64,
        previous: DVector<f64>,
        candidate: DVector<f64>,
        distance: f64,
        bound: f64,
    },

    #[error("branch does not return to the trivial point: {0}")]
    BranchLimit(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
