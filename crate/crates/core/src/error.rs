//! Crate-wide error type.

use thiserror::Error;

/// Residuals of a rejected rank-1 candidate, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct CandidateFailure {
    /// Which block the decomposition was pivoted on.
    pub pivot: String,
    /// |x̂ᵀHx̂ − 1|
    pub h_residual: f64,
    /// max over inequality blocks of x̂ᵀB_k x̂ (positive = violated)
    pub worst_ineq: f64,
    /// max over equality blocks of |x̂ᵀB_j x̂|
    pub worst_eq: f64,
    /// |x̂ᵀQx̂ − ζ_p|
    pub objective_error: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("eigensolver did not converge within the iteration cap")]
    EigenFailure,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("problem file error: {0}")]
    Format(String),

    #[error("SDP solver failed ({status}): {context}")]
    SolverFailure { status: String, context: String },

    #[error("1-d concave search failed: {0}")]
    LineSearchFailure(&'static str),

    #[error("decomposition precondition violated: {0}")]
    DecompositionPrecondition(String),

    #[error("no decomposition candidate verified ({} candidates rejected)", candidates.len())]
    NoVerifiedCandidate { candidates: Vec<CandidateFailure> },

    #[error("rank-reduction walk stalled: {0}")]
    RankReductionStall(String),

    #[error("random draw cap of {cap} exceeded for family {family}")]
    DrawCapExceeded { family: String, cap: usize },

    #[error("all branches of the union are infeasible")]
    UnionInfeasible,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
