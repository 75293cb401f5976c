use crate::expr::{EvalError, ParseError};
use crate::forms::Basis;
use crate::point::BundlePoint;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// The coefficient-matching (semispray) system cannot be solved.
    #[error("DegenerateLagrangian at {point}: condition number {condition:.3e}")]
    DegenerateLagrangian { point: BundlePoint, condition: f64 },
    /// The Euler-Lagrange chain-rule matrix is singular.
    #[error("DegenerateEulerLagrange at {point}: condition number {condition:.3e}")]
    DegenerateEulerLagrange { point: BundlePoint, condition: f64 },
    #[error("basis mismatch: {0:?} vs {1:?}")]
    BasisMismatch(Basis, Basis),
    #[error("invalid definition: {0}")]
    Invalid(String),
}

impl Error {
    /// True for the errors that signal a degenerate Lagrangian in either
    /// dynamics mode.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::DegenerateLagrangian { .. } | Error::DegenerateEulerLagrange { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
