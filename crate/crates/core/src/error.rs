use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("payoff entry at row {row}, column {col} is {value}; entries must lie in (0, 1]")]
    PayoffOutOfRange { row: usize, col: usize, value: f64 },

    #[error("strategy entry {index} is negative: {value}")]
    NegativeMass { index: usize, value: f64 },

    #[error("strategy mass sums to {sum}; cannot normalize")]
    ZeroMass { sum: f64 },

    #[error("constant payoff matrix cannot be normalized")]
    ConstantMatrix,

    #[error("degenerate game: x·Sx = {value} is not positive")]
    DegenerateGame { value: f64 },

    #[error("payoff matrix fails the nonsingularity check (|det| = {det:e}, rcond = {rcond:e})")]
    SingularGame { det: f64, rcond: f64 },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("game generation failed after {attempts} jitter attempts")]
    GenerationFailed { attempts: usize },

    #[error("game has {n} strategies, above the enumeration cap {n_max}")]
    OracleTooLarge { n: usize, n_max: usize },

    #[error("multiplier solve started from an infeasible point (worst violation {violation:e})")]
    InfeasibleStart { violation: f64 },

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
