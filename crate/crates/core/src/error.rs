use thiserror::Error;

/// Errors surfaced by the solver, the estimators and the oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A factorization pivot fell below the positive-definiteness threshold.
    #[error("matrix is not symmetric positive-definite: pivot {pivot} = {value:e} is below the acceptance threshold")]
    NotSpd { pivot: usize, value: f64 },

    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A matrix given as exactly symmetric is not.
    #[error("matrix is not symmetric: entries ({row},{col}) and ({col},{row}) differ")]
    NotSymmetric { row: usize, col: usize },

    /// Structurally invalid input (wrong shape, non-finite values, bad labels, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two consecutive expected returns coincide, so the recursion that spans
    /// the stationary set is undefined. `index` is the first offending
    /// adjacent pair in the ordering the operation ran on.
    #[error("equal consecutive means at position {index}: the closed-form recursion requires distinct consecutive expected returns")]
    EqualConsecutiveMeans { index: usize },

    /// A normalizing sum vanished, so the budget-feasible point cannot be built.
    #[error("degenerate normalization: a weight-sum used for budget scaling vanished")]
    DegenerateNormalization,

    /// The stationarity condition has no solution along the search direction:
    /// the objective is monotone there.
    #[error("degenerate denominator: the risk-adjusted return has no stationary point for these moments")]
    DegenerateDenominator,

    /// The first-order conditions produced a stationary point that is not a
    /// maximum; both the stationary candidate and the better alternative are
    /// carried so the caller can inspect them.
    #[error("stationary point is not a maximum: Q = {q_stationary} at the stationary weights vs Q = {q_alternative} at the alternative")]
    StationaryPointNotMax {
        stationary: Vec<f64>,
        alternative: Vec<f64>,
        q_stationary: f64,
        q_alternative: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
