use thiserror::Error;

use crate::expr::{EvalError, ParseError};

/// Errors produced by the numerical operations of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension {0} is not supported (expected 1..=3)")]
    Dimension(usize),

    #[error("axis {axis}: lower bound {lo} is not below upper bound {hi}")]
    EmptyBox { axis: usize, lo: f64, hi: f64 },

    #[error("axis {axis}: resolution must be at least 1")]
    ZeroResolution { axis: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },

    #[error("operands are defined on different grids")]
    GridMismatch,

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("exponent p = {0} is not in [1, inf]")]
    InvalidExponent(f64),

    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),

    #[error("epsilon {eps} leaves no interior nodes in the domain")]
    EmptyInterior { eps: f64 },

    #[error("epsilon ladder must be nonempty and strictly decreasing")]
    EpsLadder,

    #[error("normalization resolution {0} is below the minimum of 32 cells per axis")]
    CoarseNormalization(usize),

    #[error("extrapolation order must be at least 1, got {0}")]
    ExtrapolationOrder(u32),

    #[error("derivative order {0} exceeds the supported maximum of 2")]
    OrderTooHigh(u32),

    #[error("multi-index has length {got}, the grid has dimension {expected}")]
    MultiIndexLength { expected: usize, got: usize },

    #[error("malformed multi-index '{0}'")]
    BadMultiIndex(String),

    #[error("the test-function set is empty")]
    NoTestFunctions,

    #[error("test function support is not inside the domain or region")]
    SupportEscapes,

    #[error("derivative family is missing the multi-index {0}")]
    IncompleteFamily(String),

    #[error("support of f lies within {dist} of the boundary, need more than {needed}")]
    SupportNearBoundary { dist: f64, needed: f64 },

    #[error("derivative at the anchor is zero")]
    SingularDerivative,

    #[error("iterate {iteration} is not finite")]
    NonFiniteIterate { iteration: usize },

    #[error("vector length mismatch: {0} vs {1}")]
    VectorLength(usize, usize),

    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T> = std::result::Result<T, Error>;
