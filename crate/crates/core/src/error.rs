use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected n={expected}, got n={found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("integration budget exhausted after {evaluations} evaluations (estimate {estimate}, error {error})")]
    BudgetExhausted {
        evaluations: u64,
        estimate: f64,
        error: f64,
    },
    #[error("integrand not integrable: {0}")]
    NonIntegrable(String),
    #[error("no bracket found for the Luxemburg norm: {0}")]
    BracketNotFound(String),
    #[error("numerical instability: {0}")]
    Instability(String),
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("division guard: {0}")]
    DivisionGuard(String),
    #[error("projection collapsed to zero after {attempts} attempts")]
    ProjectionCollapsed { attempts: usize },
    #[error("exponent symmetry violated: {0}")]
    SymmetryViolated(String),
    #[error("center mismatch: {0}")]
    CenterMismatch(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("sample lies inside an expanded ball: {0}")]
    InsideExpandedBall(String),
}

pub type Result<T> = std::result::Result<T, Error>;
