use thiserror::Error;

use crate::nehari::GroundStateReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid exponent {value}: {reason}")]
    InvalidExponent { value: f64, reason: String },

    #[error("invalid fractional order alpha = {0}")]
    InvalidOrder(f64),

    #[error("field is not localized: tail mass fraction {tail_mass:.3e} exceeds {limit:.1e}")]
    NotLocalized { tail_mass: f64, limit: f64 },

    #[error("non-finite value in {term}")]
    NumericalOverflow { term: &'static str },

    #[error("operation requires potential class {expected}, got {found}")]
    UnsupportedClass { expected: &'static str, found: String },

    #[error("fibering map does not turn downward for t <= {t_max:e}")]
    NoNehariIntersection { t_max: f64 },

    #[error("no start could be projected onto the Nehari manifold")]
    NoFeasibleStart,

    #[error("iteration cap reached after {} iterations (grad norm {:.3e})", .0.iterations, .0.grad_norm_final)]
    NotConverged(Box<GroundStateReport>),

    #[error("field is off the Nehari manifold: residual {residual:.3e} > {limit:.3e}")]
    NotOnManifold { residual: f64, limit: f64 },

    #[error("invalid shift: {0}")]
    InvalidShift(String),

    #[error("unstable time step: mass drift {drift:.3e}, try dt <= {suggested_dt:e}")]
    UnstableStep { drift: f64, suggested_dt: f64 },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("invalid problem: {0}")]
    InvalidSpec(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
