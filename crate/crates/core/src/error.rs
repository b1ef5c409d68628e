use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
///
/// Variant names double as the machine-readable error codes emitted by the
/// command-line front end.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not hyperbolic: |trace| = {trace} <= 2")]
    NotHyperbolic { trace: f64 },

    #[error("construction failed: {0}")]
    ConstructionFailure(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("eigenvalue iteration did not converge")]
    ConvergenceFailure,

    #[error("insufficient modulus gap at index {k}: |l{k}|/|l{k1}| - 1 = {rel_gap:e}", k1 = k + 1)]
    InsufficientGap { k: usize, rel_gap: f64 },

    #[error("bad partition {parts:?} for dimension {d}")]
    BadPartition { parts: Vec<usize>, d: usize },

    #[error("curve image is not loxodromic (modulus tie)")]
    NotLoxodromic,

    #[error("subspace intersection has numerical dimension {dim}, expected 1")]
    TransversalityFailure { dim: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("critical point: |f'(z)| = {0:e}")]
    CriticalPoint(f64),

    #[error("too few points: {got} < {need}")]
    TooFewPoints { got: usize, need: usize },

    #[error("invalid word: {0}")]
    InvalidWord(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Short variant name, stable across releases.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotHyperbolic { .. } => "NotHyperbolic",
            Error::ConstructionFailure(_) => "ConstructionFailure",
            Error::BudgetExceeded(_) => "BudgetExceeded",
            Error::ConvergenceFailure => "ConvergenceFailure",
            Error::InsufficientGap { .. } => "InsufficientGap",
            Error::BadPartition { .. } => "BadPartition",
            Error::NotLoxodromic => "NotLoxodromic",
            Error::TransversalityFailure { .. } => "TransversalityFailure",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::CriticalPoint(_) => "CriticalPoint",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::InvalidWord(_) => "InvalidWord",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::Config(_) => "ConfigError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
