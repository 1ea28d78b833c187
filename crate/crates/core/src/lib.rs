//! Exactness certificates and constructive rank-1 recovery for SDP
//! relaxations of nonconvex quadratically constrained quadratic programs.
//!
//! The library works with homogeneous QCQPs
//!
//! ```text
//!     minimize    xᵀQx
//!     subject to  xᵀB_j x  = 0   (equality blocks)
//!                 xᵀB_k x ≤ 0   (inequality blocks)
//!                 xᵀHx = 1,  optionally  Ax = 0
//! ```
//!
//! and their SDP relaxations over X ⪰ 0. It decides sufficient conditions
//! under which the relaxation is tight for *every* objective, solves the
//! relaxation with a dense primal-dual interior-point method, and extracts a
//! rank-1 (hence feasible for the original QCQP) optimal solution from the
//! relaxed optimum.
//!
//! Modules:
//! - [`sym`] — dense symmetric matrices and spectral primitives
//! - [`model`] — problem types, homogenization, the on-disk format
//! - [`sdp`] — the interior-point solver
//! - [`certify`] — exactness certificates and dual-cone checks
//! - [`recovery`] — rank-1 decomposition and solution extraction
//! - [`oracle`] — brute-force sampling baseline for desk-scale validation
//! - [`instances`] — canonical and random instance families
//! - [`pipeline`] — certify → solve → recover → cross-check orchestration

pub mod certify;
pub mod error;
pub mod instances;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod recovery;
pub mod sdp;
pub mod sym;

pub use error::Error;
pub use model::{ConicQcqp, InhomQcqp};
pub use sym::SymMatrix;

pub type Result<T> = std::result::Result<T, Error>;
