use thiserror::Error;

/// Errors raised by the solver, the condition-number routines and the estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TikhError {
    #[error("degenerate structure: {0}")]
    DegenerateStructure(String),

    #[error("operation not defined for nonlinear structure {0}")]
    UnsupportedForNonlinear(String),

    #[error("matrix is not in the structure class (relative residual {residual:.3e})")]
    NotInClass { residual: f64 },

    #[error("bad dimension: {0}")]
    BadDimension(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("shifted generalized singular value underflows at index {0}")]
    SingularShift(usize),

    #[error("basis does not reproduce the coefficient matrix (relative residual {residual:.3e})")]
    BasisMismatch { residual: f64 },

    #[error("componentwise condition undefined: zero solution components at {0:?}")]
    ZeroDenominator(Vec<usize>),

    #[error("dense assembly needs {entries} entries, cap is {cap}; use the power or SCE estimators")]
    SizeCap { entries: usize, cap: usize },

    #[error("selector M must have exactly one row, got {0}")]
    MNotSingleRow(usize),

    #[error("Frechet operator is numerically zero")]
    ZeroOperator,

    #[error("random samples are linearly dependent (rank {rank} < {wanted})")]
    DegenerateSamples { rank: usize, wanted: usize },

    #[error("perturbed problem lost rank: {0}")]
    PerturbedRankDeficient(String),

    #[error("unknown example `{0}`")]
    UnknownExample(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, TikhError>;
