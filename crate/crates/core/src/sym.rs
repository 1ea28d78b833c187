//! Dense symmetric matrices and the spectral primitives the rest of the
//! crate is built on.
//!
//! All matrices here are real symmetric with the lower triangle
//! authoritative: every constructor symmetrizes or validates its input, so a
//! [`SymMatrix`] is symmetric by construction and all entries are finite.
//! Target scale is small (n up to a-few-dozen); everything is dense.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::Result;

/// Iteration cap handed to the symmetric eigensolver.
const EIGEN_MAX_ITER: usize = 2000;

/// A dense real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    /// The zero matrix of dimension `n`.
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            m: DMatrix::zeros(n, n),
        }
    }

    /// The identity of dimension `n`.
    pub fn identity(n: usize) -> Self {
        SymMatrix {
            m: DMatrix::identity(n, n),
        }
    }

    /// Diagonal matrix from the given entries.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix {
            m: DMatrix::from_diagonal(&DVector::from_row_slice(diag)),
        }
    }

    /// Builds from a callback; the result is symmetrized as (A + Aᵀ)/2.
    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        let raw = DMatrix::from_fn(n, n, f);
        Self::symmetrized(raw)
    }

    /// Wraps a dense matrix, forcing symmetry as (A + Aᵀ)/2.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "symmetrized: matrix must be square");
        let sym = (&m + m.transpose()) * 0.5;
        SymMatrix { m: sym }
    }

    /// Validates a dense square matrix: finite entries and asymmetry within
    /// `asym_tol`, then symmetrizes. Used by the file parser.
    pub fn from_dense(m: DMatrix<f64>, asym_tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                context: "SymMatrix::from_dense",
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if !m[(i, j)].is_finite() {
                    return Err(Error::InvalidProblem(format!(
                        "non-finite entry at ({i},{j})"
                    )));
                }
                if (m[(i, j)] - m[(j, i)]).abs() > asym_tol {
                    return Err(Error::InvalidProblem(format!(
                        "asymmetric matrix: ({i},{j}) = {} vs ({j},{i}) = {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Rank-1 matrix v·vᵀ.
    pub fn outer(v: &DVector<f64>) -> Self {
        SymMatrix { m: v * v.transpose() }
    }

    /// Builds from row data (used by the parser); validates like
    /// [`SymMatrix::from_dense`].
    pub fn from_rows(rows: &[Vec<f64>], asym_tol: f64) -> Result<Self> {
        let n = rows.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "SymMatrix::from_rows",
                    expected: n,
                    got: rows[i].len(),
                });
            }
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_dense(m, asym_tol)
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Rows as `Vec<Vec<f64>>`, for serialization.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.m[(i, j)]).collect())
            .collect()
    }

    pub fn frob_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.frob_norm() <= tol
    }

    pub fn scale(&self, c: f64) -> Self {
        SymMatrix { m: &self.m * c }
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        SymMatrix {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        SymMatrix {
            m: &self.m - &other.m,
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    /// A + cI.
    pub fn add_scaled_identity(&self, c: f64) -> Self {
        let mut m = self.m.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += c;
        }
        SymMatrix { m }
    }

    /// xᵀAx.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.m * x)[(0, 0)]
    }

    /// Ax.
    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.m * x
    }

    /// Congruence NᵀAN for a (not necessarily square) basis matrix N.
    pub fn congruence(&self, n_basis: &DMatrix<f64>) -> SymMatrix {
        SymMatrix::symmetrized(n_basis.transpose() * &self.m * n_basis)
    }

    /// Full spectral decomposition, eigenvalues sorted ascending.
    pub fn eigendecompose(&self) -> Result<SpectralDecomposition> {
        let n = self.n();
        if n == 0 {
            return Ok(SpectralDecomposition {
                eigenvalues: DVector::zeros(0),
                eigenvectors: DMatrix::zeros(0, 0),
            });
        }
        let eig = self
            .m
            .clone()
            .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)
            .ok_or(Error::EigenFailure)?;
        // nalgebra returns eigenvalues unordered; sort ascending and permute
        // the eigenvector columns to match.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
        let eigenvectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Smallest eigenvalue.
    pub fn min_eig(&self) -> Result<f64> {
        Ok(self.eigendecompose()?.eigenvalues[0])
    }

    /// Largest eigenvalue.
    pub fn max_eig(&self) -> Result<f64> {
        let d = self.eigendecompose()?;
        Ok(d.eigenvalues[d.eigenvalues.len() - 1])
    }

    /// True iff min_eig(A) ≥ −tol.
    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.min_eig()? >= -tol)
    }

    /// Sufficient PSD certificate by diagonal dominance: every A(i,i) must be
    /// nonnegative and at least the sum of |A(i,j)| over j ≠ i. A `false`
    /// answer does not imply the matrix is not PSD.
    pub fn is_diag_dominant_psd(&self) -> bool {
        let n = self.n();
        for i in 0..n {
            let d = self.m[(i, i)];
            if d < 0.0 {
                return false;
            }
            let off: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| self.m[(i, j)].abs())
                .sum();
            if d < off {
                return false;
            }
        }
        true
    }
}

/// Frobenius inner product ⟨A,B⟩ = Σ A(i,j)·B(i,j) = trace(AB).
pub fn inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            context: "inner",
            expected: a.n(),
            got: b.n(),
        });
    }
    Ok(a.m.dot(&b.m))
}

/// Inner product without the dimension check, for hot paths that have
/// already validated their inputs.
pub(crate) fn inner_unchecked(a: &SymMatrix, b: &SymMatrix) -> f64 {
    a.m.dot(&b.m)
}

/// Eigenvalue/eigenvector pair of a [`SymMatrix`], eigenvalues ascending and
/// eigenvectors orthonormal.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    /// VΛVᵀ.
    pub fn reconstruct(&self) -> SymMatrix {
        let lambda = DMatrix::from_diagonal(&self.eigenvalues);
        SymMatrix::symmetrized(&self.eigenvectors * lambda * self.eigenvectors.transpose())
    }

    /// i-th eigenvector as a column.
    pub fn eigenvector(&self, i: usize) -> DVector<f64> {
        self.eigenvectors.column(i).into_owned()
    }

    /// Orthonormal basis of the eigenspaces with |λ| ≤ tol (n×k, possibly
    /// k = 0).
    pub fn kernel_basis(&self, tol: f64) -> DMatrix<f64> {
        let idx: Vec<usize> = (0..self.eigenvalues.len())
            .filter(|&i| self.eigenvalues[i].abs() <= tol)
            .collect();
        let n = self.eigenvectors.nrows();
        DMatrix::from_fn(n, idx.len(), |i, j| self.eigenvectors[(i, idx[j])])
    }
}
