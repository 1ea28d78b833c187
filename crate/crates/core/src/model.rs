//! Problem data types, homogenization of inhomogeneous QCQPs, and the
//! on-disk problem format.
//!
//! The central type is [`ConicQcqp`]: homogeneous data (Q, H, equality and
//! inequality blocks, optional linear-equality face `Ax = 0`) for
//!
//! ```text
//!     minimize  xᵀQx   s.t.  xᵀB_j x = 0, xᵀB_k x ≤ 0, xᵀHx = 1, Ax = 0
//! ```
//!
//! and its SDP relaxation over X ⪰ 0 with ⟨B_j,X⟩ = 0, ⟨B_k,X⟩ ≤ 0,
//! ⟨H,X⟩ = 1, ⟨AᵀA,X⟩ = 0.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::sym::SymMatrix;
use crate::Result;

/// Asymmetry tolerated in parsed matrices before rejection; anything below
/// is symmetrized away as (A + Aᵀ)/2.
pub const ASYM_TOL: f64 = 1e-12;

/// Homogeneous QCQP / SDP-relaxation data.
#[derive(Debug, Clone)]
pub struct ConicQcqp {
    n: usize,
    q: SymMatrix,
    h: SymMatrix,
    eq_blocks: Vec<SymMatrix>,
    ineq_blocks: Vec<SymMatrix>,
    face_rows: Option<DMatrix<f64>>,
}

impl ConicQcqp {
    /// Validates dimensions and the H ≠ O invariant.
    pub fn new(
        q: SymMatrix,
        h: SymMatrix,
        eq_blocks: Vec<SymMatrix>,
        ineq_blocks: Vec<SymMatrix>,
    ) -> Result<Self> {
        let n = q.n();
        if h.n() != n {
            return Err(Error::DimensionMismatch {
                context: "ConicQcqp H",
                expected: n,
                got: h.n(),
            });
        }
        for b in eq_blocks.iter().chain(ineq_blocks.iter()) {
            if b.n() != n {
                return Err(Error::DimensionMismatch {
                    context: "ConicQcqp block",
                    expected: n,
                    got: b.n(),
                });
            }
        }
        if h.is_zero(0.0) {
            return Err(Error::InvalidProblem(
                "H must not be the zero matrix".into(),
            ));
        }
        Ok(ConicQcqp {
            n,
            q,
            h,
            eq_blocks,
            ineq_blocks,
            face_rows: None,
        })
    }

    /// Attaches the homogeneous linear equality `Ax = 0`; the SDP gains the
    /// single equality ⟨AᵀA, X⟩ = 0. A must have `n` columns.
    pub fn attach_face(mut self, a: DMatrix<f64>) -> Result<Self> {
        if a.ncols() != self.n {
            return Err(Error::DimensionMismatch {
                context: "attach_face",
                expected: self.n,
                got: a.ncols(),
            });
        }
        self.face_rows = Some(a);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn objective(&self) -> &SymMatrix {
        &self.q
    }

    pub fn normalizer(&self) -> &SymMatrix {
        &self.h
    }

    pub fn eq_blocks(&self) -> &[SymMatrix] {
        &self.eq_blocks
    }

    pub fn ineq_blocks(&self) -> &[SymMatrix] {
        &self.ineq_blocks
    }

    pub fn face_rows(&self) -> Option<&DMatrix<f64>> {
        self.face_rows.as_ref()
    }

    /// Gram matrix AᵀA of the face rows, formed at use time.
    pub fn face_gram(&self) -> Option<SymMatrix> {
        self.face_rows
            .as_ref()
            .map(|a| SymMatrix::symmetrized(a.transpose() * a))
    }

    /// Replaces the objective, keeping constraints (used by union solves and
    /// the auxiliary subset-test SDPs).
    pub fn with_objective(&self, q: SymMatrix) -> Result<Self> {
        let mut p = self.clone();
        if q.n() != p.n {
            return Err(Error::DimensionMismatch {
                context: "with_objective",
                expected: p.n,
                got: q.n(),
            });
        }
        p.q = q;
        Ok(p)
    }
}

/// Constraint sense of an inhomogeneous quadratic constraint
/// q(u) = uᵀQu + 2bᵀu + c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sense {
    /// q(u) ≤ 0
    Le,
    /// q(u) = 0
    Eq,
    /// lo ≤ uᵀQu + 2bᵀu ≤ hi (the constant c is unused)
    Range { lo: f64, hi: f64 },
}

/// One quadratic constraint of an [`InhomQcqp`].
#[derive(Debug, Clone)]
pub struct QuadConstraint {
    pub q: SymMatrix,
    pub b: DVector<f64>,
    pub c: f64,
    pub sense: Sense,
}

/// Inhomogeneous QCQP over u ∈ ℝ^ℓ:
/// minimize uᵀQ₀u + 2b₀ᵀu + c₀ subject to quadratic constraints.
#[derive(Debug, Clone)]
pub struct InhomQcqp {
    pub l: usize,
    pub q0: SymMatrix,
    pub b0: DVector<f64>,
    pub c0: f64,
    pub constraints: Vec<QuadConstraint>,
    /// Index of the constraint absorbed into the normalizer (slack lift).
    /// `None` selects the ±1 auxiliary-coordinate lift instead.
    pub normalizer: Option<usize>,
}

impl InhomQcqp {
    fn check_dims(&self) -> Result<()> {
        if self.q0.n() != self.l || self.b0.len() != self.l {
            return Err(Error::DimensionMismatch {
                context: "InhomQcqp objective",
                expected: self.l,
                got: self.q0.n(),
            });
        }
        for c in &self.constraints {
            if c.q.n() != self.l || c.b.len() != self.l {
                return Err(Error::DimensionMismatch {
                    context: "InhomQcqp constraint",
                    expected: self.l,
                    got: c.q.n(),
                });
            }
        }
        Ok(())
    }
}

/// Assembles the (ℓ+1)-dimensional block matrix (M, v; vᵀ, s).
fn lift_block(m: &SymMatrix, v: &DVector<f64>, s: f64) -> SymMatrix {
    let l = m.n();
    SymMatrix::from_fn(l + 1, |i, j| {
        if i < l && j < l {
            m.get(i, j)
        } else if i < l && j == l {
            v[i]
        } else if i == l && j < l {
            v[j]
        } else {
            s
        }
    })
}

/// Lifts an inhomogeneous QCQP into an (ℓ+1)-dimensional homogeneous one.
///
/// Two patterns are automated:
///
/// * **Slack lift** (`normalizer = Some(k*)`): every constraint must be a
///   pure quadratic `uᵀQ_k u ≤ ρ_k` with `ρ_k > 0` (encoded as c = −ρ_k) and
///   the objective purely quadratic. Constraint k* is absorbed into the
///   normalizer: H = (Q_{k*}/ρ_{k*}, 0; 0ᵀ, 1), and each other constraint
///   becomes B_k = (Q_k/ρ_k − Q_{k*}/ρ_{k*}, 0; 0ᵀ, −1).
///
/// * **Sign lift** (`normalizer = None`): the auxiliary coordinate carries
///   the constants, H = diag(0,…,0,1), objective (Q₀, b₀; b₀ᵀ, c₀), each
///   constraint q(u) ≤ 0 the block (Q, b; bᵀ, c), equalities analogous, and
///   a range lo ≤ uᵀQu + 2bᵀu ≤ hi the two blocks (Q, b; bᵀ, −hi) and
///   (−Q, −b; −bᵀ, lo). Optimal values coincide up to the u_{ℓ+1} = ±1 sign
///   ambiguity, which quadratic forms cannot see.
pub fn homogenize(p: &InhomQcqp) -> Result<ConicQcqp> {
    p.check_dims()?;
    let l = p.l;
    let zero_v = DVector::zeros(l);

    match p.normalizer {
        Some(k_star) => {
            if k_star >= p.constraints.len() {
                return Err(Error::InvalidParameter(format!(
                    "normalizer index {k_star} out of range"
                )));
            }
            if p.b0.norm() != 0.0 || p.c0 != 0.0 {
                return Err(Error::InvalidProblem(
                    "slack lift requires a purely quadratic objective".into(),
                ));
            }
            let mut scaled = Vec::with_capacity(p.constraints.len());
            for (i, c) in p.constraints.iter().enumerate() {
                if c.sense != Sense::Le || c.b.norm() != 0.0 {
                    return Err(Error::InvalidProblem(format!(
                        "slack lift requires pure quadratic ≤ constraints (constraint {i})"
                    )));
                }
                if c.c >= 0.0 {
                    return Err(Error::InvalidProblem(format!(
                        "slack lift requires a positive right-hand side (constraint {i})"
                    )));
                }
                scaled.push(c.q.scale(1.0 / (-c.c)));
            }
            let h = lift_block(&scaled[k_star], &zero_v, 1.0);
            let q = lift_block(&p.q0, &zero_v, 0.0);
            let ineq: Vec<SymMatrix> = scaled
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != k_star)
                .map(|(_, qk)| lift_block(&qk.sub(&scaled[k_star]), &zero_v, -1.0))
                .collect();
            ConicQcqp::new(q, h, Vec::new(), ineq)
        }
        None => {
            let q = lift_block(&p.q0, &p.b0, p.c0);
            let mut h_diag = vec![0.0; l + 1];
            h_diag[l] = 1.0;
            let h = SymMatrix::from_diagonal(&h_diag);
            let mut eq = Vec::new();
            let mut ineq = Vec::new();
            for c in &p.constraints {
                match c.sense {
                    Sense::Le => ineq.push(lift_block(&c.q, &c.b, c.c)),
                    Sense::Eq => eq.push(lift_block(&c.q, &c.b, c.c)),
                    Sense::Range { lo, hi } => {
                        ineq.push(lift_block(&c.q.neg(), &(-&c.b), lo));
                        ineq.push(lift_block(&c.q, &c.b, -hi));
                    }
                }
            }
            ConicQcqp::new(q, h, eq, ineq)
        }
    }
}

// --- on-disk format -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ConstraintDoc {
    matrix: Vec<Vec<f64>>,
    kind: String,
}

#[derive(Serialize, Deserialize)]
struct ProblemDoc {
    version: u32,
    n: usize,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
    constraints: Vec<ConstraintDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    face_rows: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

const FORMAT_VERSION: u32 = 1;

fn matrix_from_doc(rows: &[Vec<f64>], n: usize, field: &str) -> Result<SymMatrix> {
    if rows.len() != n {
        return Err(Error::Format(format!(
            "{field}: expected {n} rows, got {}",
            rows.len()
        )));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::Format(format!(
                "{field}: row {i} has {} entries, expected {n}",
                r.len()
            )));
        }
    }
    SymMatrix::from_rows(rows, ASYM_TOL)
        .map_err(|e| Error::Format(format!("{field}: {e}")))
}

/// Parses a problem document together with its optional `meta` field.
pub fn parse_document(bytes: &[u8]) -> Result<(ConicQcqp, Option<serde_json::Value>)> {
    let doc: ProblemDoc = serde_json::from_slice(bytes)
        .map_err(|e| Error::Format(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    if doc.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {}",
            doc.version
        )));
    }
    if doc.n == 0 {
        return Err(Error::Format("n must be positive".into()));
    }
    let q = matrix_from_doc(&doc.q, doc.n, "Q")?;
    let h = matrix_from_doc(&doc.h, doc.n, "H")?;
    let mut eq = Vec::new();
    let mut ineq = Vec::new();
    for (i, c) in doc.constraints.iter().enumerate() {
        let m = matrix_from_doc(&c.matrix, doc.n, &format!("constraints[{i}].matrix"))?;
        match c.kind.as_str() {
            "eq" => eq.push(m),
            "ineq" => ineq.push(m),
            other => {
                return Err(Error::Format(format!(
                    "constraints[{i}].kind: expected \"eq\" or \"ineq\", got \"{other}\""
                )))
            }
        }
    }
    let mut p =
        ConicQcqp::new(q, h, eq, ineq).map_err(|e| Error::Format(e.to_string()))?;
    if let Some(rows) = &doc.face_rows {
        let r = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != doc.n {
                return Err(Error::Format(format!(
                    "face_rows[{i}]: expected {} entries, got {}",
                    doc.n,
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!(
                    "face_rows[{i}]: non-finite entry"
                )));
            }
        }
        let a = DMatrix::from_fn(r, doc.n, |i, j| rows[i][j]);
        p = p.attach_face(a)?;
    }
    Ok((p, doc.meta))
}

/// Parses a problem document, discarding metadata.
pub fn parse_problem(bytes: &[u8]) -> Result<ConicQcqp> {
    parse_document(bytes).map(|(p, _)| p)
}

/// Serializes a problem (plus optional metadata) to the text format.
/// Symmetric storage guarantees the emitted dense matrices are exactly
/// symmetric; output is byte-stable for a given problem.
pub fn emit_document(p: &ConicQcqp, meta: Option<serde_json::Value>) -> Vec<u8> {
    let doc = ProblemDoc {
        version: FORMAT_VERSION,
        n: p.n(),
        q: p.objective().to_rows(),
        h: p.normalizer().to_rows(),
        constraints: p
            .eq_blocks()
            .iter()
            .map(|m| ConstraintDoc {
                matrix: m.to_rows(),
                kind: "eq".into(),
            })
            .chain(p.ineq_blocks().iter().map(|m| ConstraintDoc {
                matrix: m.to_rows(),
                kind: "ineq".into(),
            }))
            .collect(),
        face_rows: p.face_rows().map(|a| {
            (0..a.nrows())
                .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
                .collect()
        }),
        meta,
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("problem document serializes");
    out.push(b'\n');
    out
}

/// Serializes a problem without metadata.
pub fn emit_problem(p: &ConicQcqp) -> Vec<u8> {
    emit_document(p, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn mat(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), 1e-12).unwrap()
    }

    #[test]
    fn slack_lift_matches_block_forms() {
        // ℓ=1, Q0=[−1], Q1=[1], Q2=[2], constraints uᵀQ_k u ≤ 1 with the
        // second one absorbed into the normalizer.
        let p = InhomQcqp {
            l: 1,
            q0: mat(&[&[-1.0]]),
            b0: DVector::zeros(1),
            c0: 0.0,
            constraints: vec![
                QuadConstraint {
                    q: mat(&[&[1.0]]),
                    b: DVector::zeros(1),
                    c: -1.0,
                    sense: Sense::Le,
                },
                QuadConstraint {
                    q: mat(&[&[2.0]]),
                    b: DVector::zeros(1),
                    c: -1.0,
                    sense: Sense::Le,
                },
            ],
            normalizer: Some(1),
        };
        let h = homogenize(&p).unwrap();
        assert_eq!(h.n(), 2);
        assert_eq!(h.objective().to_rows(), vec![vec![-1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(h.ineq_blocks().len(), 1);
        assert_eq!(
            h.ineq_blocks()[0].to_rows(),
            vec![vec![-1.0, 0.0], vec![0.0, -1.0]]
        );
        assert_eq!(h.normalizer().to_rows(), vec![vec![2.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn sign_lift_range_blocks() {
        // ℓ=1, Q0=[1], b0=[0], range −1 ≤ 2·(1/2)·u ≤ 1
        let p = InhomQcqp {
            l: 1,
            q0: mat(&[&[1.0]]),
            b0: DVector::zeros(1),
            c0: 0.0,
            constraints: vec![QuadConstraint {
                q: mat(&[&[0.0]]),
                b: DVector::from_row_slice(&[0.5]),
                c: 0.0,
                sense: Sense::Range { lo: -1.0, hi: 1.0 },
            }],
            normalizer: None,
        };
        let h = homogenize(&p).unwrap();
        assert_eq!(h.ineq_blocks().len(), 2);
        assert_eq!(
            h.ineq_blocks()[0].to_rows(),
            vec![vec![0.0, -0.5], vec![-0.5, -1.0]]
        );
        assert_eq!(
            h.ineq_blocks()[1].to_rows(),
            vec![vec![0.0, 0.5], vec![0.5, -1.0]]
        );
        assert_eq!(h.normalizer().to_rows(), vec![vec![0.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn constant_objective_lifts_to_zero() {
        let p = InhomQcqp {
            l: 2,
            q0: SymMatrix::zeros(2),
            b0: DVector::zeros(2),
            c0: 0.0,
            constraints: vec![],
            normalizer: None,
        };
        let h = homogenize(&p).unwrap();
        assert!(h.objective().is_zero(0.0));
        assert_eq!(h.n(), 3);
    }

    #[test]
    fn attach_face_forms_gram() {
        let p = ConicQcqp::new(
            SymMatrix::identity(2),
            SymMatrix::identity(2),
            vec![],
            vec![],
        )
        .unwrap();
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let p = p.attach_face(a).unwrap();
        let g = p.face_gram().unwrap();
        assert_eq!(g.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);

        // zero row: vacuous equality block
        let p2 = ConicQcqp::new(
            SymMatrix::identity(2),
            SymMatrix::identity(2),
            vec![],
            vec![],
        )
        .unwrap()
        .attach_face(DMatrix::zeros(1, 2))
        .unwrap();
        assert!(p2.face_gram().unwrap().is_zero(0.0));

        // column-count mismatch
        let p3 = ConicQcqp::new(
            SymMatrix::identity(2),
            SymMatrix::identity(2),
            vec![],
            vec![],
        )
        .unwrap();
        assert!(p3.attach_face(DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn zero_h_rejected() {
        assert!(ConicQcqp::new(
            SymMatrix::identity(2),
            SymMatrix::zeros(2),
            vec![],
            vec![]
        )
        .is_err());
    }

    #[test]
    fn parse_minimal_document() {
        let text = br#"{"version":1,"n":1,"Q":[[1.0]],"H":[[1.0]],"constraints":[]}"#;
        let p = parse_problem(text).unwrap();
        assert_eq!(p.n(), 1);
        assert_eq!(p.objective().get(0, 0), 1.0);
    }

    #[test]
    fn parse_rejects_asymmetry() {
        let text =
            br#"{"version":1,"n":2,"Q":[[1.0,0.001],[0.0,1.0]],"H":[[1.0,0.0],[0.0,1.0]],"constraints":[]}"#;
        let err = parse_problem(text).unwrap_err();
        assert!(err.to_string().contains("asymmetric"), "{err}");
    }

    #[test]
    fn roundtrip_is_exact() {
        // B₁ = B − H with B = diag(2,1), H = I₂
        let p = ConicQcqp::new(
            mat(&[&[3.0, 0.0], &[0.0, 5.0]]),
            SymMatrix::identity(2),
            vec![mat(&[&[1.0, 0.0], &[0.0, 0.0]])],
            vec![],
        )
        .unwrap();
        let bytes = emit_problem(&p);
        let q = parse_problem(&bytes).unwrap();
        assert_eq!(q.objective().to_rows(), p.objective().to_rows());
        assert_eq!(q.eq_blocks()[0].to_rows(), p.eq_blocks()[0].to_rows());
        // emit ∘ parse ∘ emit == emit
        assert_eq!(emit_problem(&q), bytes);
    }

    #[test]
    fn sign_lift_pair_identity() {
        // ⟨B₁+B₂, X⟩ = −2·X_nn for any symmetric X when the two blocks come
        // from a range constraint with hi = −lo = 1.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let l = rng.gen_range(1..4usize);
            let q1 = SymMatrix::from_fn(l, |_, _| rng.gen_range(-2.0..2.0));
            let b1 = DVector::from_fn(l, |_, _| rng.gen_range(-2.0..2.0));
            let p = InhomQcqp {
                l,
                q0: SymMatrix::identity(l),
                b0: DVector::zeros(l),
                c0: 0.0,
                constraints: vec![QuadConstraint {
                    q: q1,
                    b: b1,
                    c: 0.0,
                    sense: Sense::Range { lo: -1.0, hi: 1.0 },
                }],
                normalizer: None,
            };
            let h = homogenize(&p).unwrap();
            let n = h.n();
            // random PSD X
            let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let x = SymMatrix::symmetrized(&g * g.transpose());
            let sum = h.ineq_blocks()[0].add(&h.ineq_blocks()[1]);
            let lhs = crate::sym::inner(&sum, &x).unwrap();
            assert_abs_diff_eq!(lhs, -2.0 * x.get(n - 1, n - 1), epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn emit_parse_emit_is_stable(seed in 0u64..60) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..5usize);
            let q = SymMatrix::from_fn(n, |_, _| rng.gen_range(-4.0..4.0));
            let mut h = SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            if h.is_zero(1e-9) {
                h = SymMatrix::identity(n);
            }
            let blocks: Vec<SymMatrix> = (0..rng.gen_range(0..3usize))
                .map(|_| SymMatrix::from_fn(n, |_, _| rng.gen_range(-2.0..2.0)))
                .collect();
            let p = ConicQcqp::new(q, h, vec![], blocks).unwrap();
            let once = emit_problem(&p);
            let again = emit_problem(&parse_problem(&once).unwrap());
            prop_assert_eq!(once, again);
        }
    }
}
