use thiserror::Error;

use crate::quantities::Dim;
use crate::spacetime::ModelKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {lhs} vs {rhs}")]
    DimensionMismatch { lhs: Dim, rhs: Dim },

    #[error("operation requires the {expected} model, got {found}")]
    WrongModel { expected: ModelKind, found: ModelKind },

    #[error("vector is not spacelike (time component {tau})")]
    NotSpacelike { tau: f64 },

    #[error("vector {components:?} is not future-like")]
    NotFutureLike { components: [f64; 4] },

    #[error("generator violates its Lie algebra constraint (residual {residual:e})")]
    AlgebraViolation { residual: f64 },

    #[error("coupling matrix is not antisymmetric (max |B + Bᵀ| = {residual:e})")]
    NotAntisymmetric { residual: f64 },

    #[error("Lagrangian expression has dimension {found}, expected 1/s on V(1)")]
    WrongLagrangianDim { found: Dim },

    #[error("exponential series did not converge within {terms} terms")]
    SeriesNotConverged { terms: usize },

    #[error("map is not an element of the proper symmetry group")]
    NotAGroupElement,

    #[error("degenerate sampling: {0}")]
    SamplingDegenerate(String),

    #[error("chord {index} of the path is not future-like")]
    ChordNotFutureLike { index: usize },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64, trace: Vec<f64> },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
