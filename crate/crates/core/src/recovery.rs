//! Constructive exactness: turning an optimal SDP matrix into an optimal
//! vector for the original QCQP.
//!
//! The workhorse is [`sturm_decompose`]: a rank-r PSD matrix X with
//! ⟨B,X⟩ ≤ 0 always admits a rank-1 decomposition X = Σ x_i x_iᵀ whose every
//! term satisfies x_iᵀBx_i ≤ 0 (with equality throughout when ⟨B,X⟩ = 0).
//! Starting from the spectral factorization, any wrong-signed pair is fixed
//! by a plane rotation chosen from the real root of a scalar quadratic; each
//! rotation permanently zeroes one term, so at most rank−1 rotations happen.
//!
//! [`recover`] applies this at an SDP optimum: if some constraint is active,
//! decompose along it, rescale a component onto the x̂ᵀHx̂ = 1 slice and
//! verify; if every inequality is strictly slack, walk the optimal face
//! along objective- and constraint-neutral directions until the rank drops
//! or a constraint activates. Verification against all constraints and the
//! relaxation value is mandatory — an unverified candidate is an error, not
//! a success.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{CandidateFailure, Error};
use crate::model::ConicQcqp;
use crate::sdp::{self, SdpSolution, SolveStatus, SolverOptions};
use crate::sym::SymMatrix;
use crate::Result;

/// Feasibility bound a verified solution satisfies on every constraint.
pub const VERIFY_FEAS_TOL: f64 = 1e-6;
/// Relative bound on |x̂ᵀQx̂ − ζ_p| for a verified solution.
pub const VERIFY_OBJ_TOL: f64 = 1e-5;

/// Rank-1 decomposition aligned with one quadratic form.
#[derive(Debug, Clone)]
pub struct SturmOutcome {
    pub vectors: Vec<DVector<f64>>,
    pub rotations: usize,
}

/// How the recovered vector was obtained.
#[derive(Debug, Clone, Serialize)]
pub enum Provenance {
    AlreadyRankOne,
    /// Decomposition pivoted on an active block.
    CaseA { pivot: String },
    /// Rank-reduction walk over the optimal face.
    CaseB,
}

/// Residuals of a candidate vector on every constraint.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// x̂ᵀHx̂ − 1
    pub h: f64,
    /// x̂ᵀB_j x̂ per equality block
    pub eq: Vec<f64>,
    /// x̂ᵀB_k x̂ per inequality block
    pub ineq: Vec<f64>,
    /// ‖Ax̂‖² (the face Gram form), when a face is attached
    #[serde(skip_serializing_if = "Option::is_none")]
    pub face: Option<f64>,
    /// |x̂ᵀQx̂ − ζ_p|
    pub objective_error: f64,
}

/// A recovered (rank-1) solution of the QCQP.
#[derive(Debug, Clone, Serialize)]
pub struct RankOneSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub residuals: ResidualReport,
    pub provenance: Provenance,
    pub verified: bool,
}

impl RankOneSolution {
    pub fn x_vector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.x)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("solution serializes")
    }
}

/// Minimum over the branches of a union of problems sharing (Q, H).
#[derive(Debug, Clone)]
pub struct UnionSolution {
    pub value: f64,
    /// Index of the winning branch (ties go to the lowest index).
    pub branch: usize,
    pub solution: RankOneSolution,
    /// Verified value per branch; `None` marks an infeasible branch.
    pub branch_values: Vec<Option<f64>>,
}

// --- rank-1 decomposition -----------------------------------------------------

/// Smaller-|α| real root of aα² + 2bα + c = 0, computed stably; ties break
/// toward the nonnegative root. Requires ac < 0 so both roots are real and
/// of opposite sign.
fn rotation_root(a: f64, b: f64, c: f64) -> f64 {
    let disc = (b * b - a * c).max(0.0).sqrt();
    let q = -(b + b.signum() * disc);
    let (r1, r2) = if a.abs() > 1e-300 {
        (q / a, if q.abs() > 1e-300 { c / q } else { 0.0 })
    } else {
        // a ≈ 0: the equation is essentially linear
        (-c / (2.0 * b), -c / (2.0 * b))
    };
    if (r1.abs() - r2.abs()).abs() <= f64::EPSILON * (r1.abs() + r2.abs()) {
        r1.max(r2)
    } else if r1.abs() < r2.abs() {
        r1
    } else {
        r2
    }
}

/// Decomposes X ⪰ 0 with ⟨B,X⟩ ≤ tol into rank-1 terms X = Σ x_i x_iᵀ with
/// every x_iᵀBx_i ≤ tol; when |⟨B,X⟩| ≤ tol the terms additionally satisfy
/// x_iᵀBx_i ≥ −tol (up to rank·rounding). The number of vectors equals the
/// numerical rank of X and at most rank−1 rotations are performed.
pub fn sturm_decompose(x: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<SturmOutcome> {
    if x.n() != b.n() {
        return Err(Error::DimensionMismatch {
            context: "sturm_decompose",
            expected: x.n(),
            got: b.n(),
        });
    }
    let xmin = x.min_eig()?;
    if xmin < -tol * (1.0 + x.frob_norm()) {
        return Err(Error::DecompositionPrecondition(format!(
            "X is not PSD within tolerance (min eigenvalue {xmin:.3e})"
        )));
    }
    let ip = crate::sym::inner_unchecked(x, b);
    if ip > tol * (1.0 + x.frob_norm() * b.frob_norm()) {
        return Err(Error::DecompositionPrecondition(format!(
            "⟨B,X⟩ = {ip:.3e} exceeds the tolerance"
        )));
    }

    let dec = x.eigendecompose()?;
    let n = x.n();
    let lmax = dec.eigenvalues[n - 1].max(0.0);
    let thresh = 1e-9 * lmax;
    let mut pieces: Vec<DVector<f64>> = Vec::new();
    for i in 0..n {
        let l = dec.eigenvalues[i];
        if l > thresh && l > 0.0 {
            pieces.push(dec.eigenvector(i) * l.sqrt());
        }
    }
    let r = pieces.len();
    let mut forms: Vec<f64> = pieces.iter().map(|p| b.quad_form(p)).collect();

    let ft = 1e-12 * (1.0 + x.frob_norm() * b.frob_norm());
    let mut rotations = 0usize;
    loop {
        let (mut imax, mut imin) = (0usize, 0usize);
        for i in 0..r {
            if forms[i] > forms[imax] {
                imax = i;
            }
            if forms[i] < forms[imin] {
                imin = i;
            }
        }
        if r == 0 || forms[imax] <= ft.max(tol.min(0.0)) || forms[imin] >= 0.0 {
            break;
        }
        if forms[imax] <= ft {
            break;
        }
        let (i, j) = (imax, imin);
        let c = forms[i];
        let a = forms[j];
        let bb = (pieces[i].transpose() * b.as_matrix() * &pieces[j])[(0, 0)];
        let alpha = rotation_root(a, bb, c);
        let denom = (1.0 + alpha * alpha).sqrt();
        let u = (&pieces[i] + &pieces[j] * alpha) / denom;
        let v = (&pieces[j] - &pieces[i] * alpha) / denom;
        pieces[i] = u;
        pieces[j] = v;
        forms[i] = b.quad_form(&pieces[i]); // ≈ 0 by construction
        forms[j] = b.quad_form(&pieces[j]);
        rotations += 1;
        if rotations > r {
            return Err(Error::DecompositionPrecondition(
                "rotation budget exceeded (numerically inconsistent input)".into(),
            ));
        }
    }
    debug_assert!(rotations <= r.saturating_sub(1).max(0) + 1);

    Ok(SturmOutcome {
        vectors: pieces,
        rotations,
    })
}

// --- verification ----------------------------------------------------------------

/// Residuals of `x` on every constraint of `p`, plus the objective error
/// against `zeta`.
pub fn residual_report(p: &ConicQcqp, x: &DVector<f64>, zeta: f64) -> ResidualReport {
    ResidualReport {
        h: p.normalizer().quad_form(x) - 1.0,
        eq: p.eq_blocks().iter().map(|b| b.quad_form(x)).collect(),
        ineq: p.ineq_blocks().iter().map(|b| b.quad_form(x)).collect(),
        face: p.face_gram().map(|g| g.quad_form(x)),
        objective_error: (p.objective().quad_form(x) - zeta).abs(),
    }
}

fn report_passes(r: &ResidualReport, zeta: f64) -> bool {
    r.h.abs() <= VERIFY_FEAS_TOL
        && r.eq.iter().all(|v| v.abs() <= VERIFY_FEAS_TOL)
        && r.ineq.iter().all(|&v| v <= VERIFY_FEAS_TOL)
        && r.face.map_or(true, |v| v.abs() <= VERIFY_FEAS_TOL)
        && r.objective_error <= VERIFY_OBJ_TOL * (1.0 + zeta.abs())
}

fn failure_from(pivot: &str, r: &ResidualReport) -> CandidateFailure {
    CandidateFailure {
        pivot: pivot.to_string(),
        h_residual: r.h.abs(),
        worst_ineq: r.ineq.iter().copied().fold(0.0, f64::max),
        worst_eq: r
            .eq
            .iter()
            .map(|v| v.abs())
            .chain(r.face.map(|v| v.abs()))
            .fold(0.0, f64::max),
        objective_error: r.objective_error,
    }
}

/// Flips the sign so the largest-magnitude entry is positive (quadratic
/// forms cannot see the sign; this stabilizes reports).
fn canonical_sign(mut x: DVector<f64>) -> DVector<f64> {
    let mut idx = 0;
    for i in 0..x.len() {
        if x[i].abs() > x[idx].abs() {
            idx = i;
        }
    }
    if x[idx] < 0.0 {
        x = -x;
    }
    x
}

// --- recovery ---------------------------------------------------------------------

struct Workspace<'a> {
    p: &'a ConicQcqp,
    zeta: f64,
    failures: Vec<CandidateFailure>,
}

impl<'a> Workspace<'a> {
    /// Scales onto x̂ᵀHx̂ = 1 and verifies; `None` means rejected (recorded).
    fn try_candidate(
        &mut self,
        raw: &DVector<f64>,
        tol: f64,
        pivot: &str,
        provenance: Provenance,
    ) -> Option<RankOneSolution> {
        let nu = self.p.normalizer().quad_form(raw);
        if nu <= tol {
            self.failures.push(CandidateFailure {
                pivot: format!("{pivot} (normalizer form {nu:.3e} not positive)"),
                h_residual: f64::INFINITY,
                worst_ineq: 0.0,
                worst_eq: 0.0,
                objective_error: f64::INFINITY,
            });
            return None;
        }
        let x = canonical_sign(raw / nu.sqrt());
        let report = residual_report(self.p, &x, self.zeta);
        if report_passes(&report, self.zeta) {
            Some(RankOneSolution {
                objective: self.p.objective().quad_form(&x),
                x: x.iter().copied().collect(),
                residuals: report,
                provenance,
                verified: true,
            })
        } else {
            self.failures.push(failure_from(pivot, &report));
            None
        }
    }

    /// Pivoted decomposition: split X along `block`, try components in
    /// descending H-form order.
    fn case_a(
        &mut self,
        x_mat: &SymMatrix,
        block: &SymMatrix,
        pivot: &str,
        tol: f64,
    ) -> Result<Option<RankOneSolution>> {
        let dec = sturm_decompose(x_mat, block, tol.max(1e-7))?;
        let mut order: Vec<usize> = (0..dec.vectors.len()).collect();
        let hforms: Vec<f64> = dec
            .vectors
            .iter()
            .map(|v| self.p.normalizer().quad_form(v))
            .collect();
        order.sort_by(|&a, &b| hforms[b].total_cmp(&hforms[a]));
        for i in order {
            if let Some(sol) = self.try_candidate(
                &dec.vectors[i],
                tol,
                pivot,
                Provenance::CaseA {
                    pivot: pivot.to_string(),
                },
            ) {
                return Ok(Some(sol));
            }
        }
        Ok(None)
    }
}

/// Extracts a verified rank-1 optimal solution from an optimal SDP solve.
///
/// `tol` is the activity threshold for constraints (and the normalizer-form
/// floor when scaling candidates). See the module docs for the flow.
pub fn recover(p: &ConicQcqp, sol: &SdpSolution, tol: f64) -> Result<RankOneSolution> {
    if sol.status != SolveStatus::Optimal {
        return Err(Error::InvalidParameter(format!(
            "recover requires an Optimal solve (got {})",
            sol.status
        )));
    }
    let zeta = sol.primal_obj;
    let mut ws = Workspace {
        p,
        zeta,
        failures: Vec::new(),
    };

    let dec = sol.x.eigendecompose()?;
    let n = p.n();
    let lmax = dec.eigenvalues[n - 1].max(0.0);
    if lmax <= 0.0 {
        return Err(Error::NoVerifiedCandidate {
            candidates: vec![CandidateFailure {
                pivot: "zero optimal matrix".into(),
                h_residual: 1.0,
                worst_ineq: 0.0,
                worst_eq: 0.0,
                objective_error: f64::INFINITY,
            }],
        });
    }
    let rank_thresh = 1e-9 * lmax;
    let rank = dec.eigenvalues.iter().filter(|&&l| l > rank_thresh).count();

    if rank <= 1 {
        let top = dec.eigenvector(n - 1) * lmax.sqrt();
        if let Some(s) = ws.try_candidate(&top, tol, "rank-1 optimum", Provenance::AlreadyRankOne)
        {
            return Ok(s);
        }
        return Err(Error::NoVerifiedCandidate {
            candidates: ws.failures,
        });
    }

    // Case (a): pivot on an exactly-satisfied block. Equality blocks and the
    // face are always active; inequalities qualify when their residual is
    // within tol of zero.
    let mut pivots: Vec<(String, SymMatrix)> = Vec::new();
    for (j, b) in p.eq_blocks().iter().enumerate() {
        pivots.push((format!("eq[{j}]"), b.clone()));
    }
    for (k, b) in p.ineq_blocks().iter().enumerate() {
        let r = crate::sym::inner_unchecked(b, &sol.x);
        if r.abs() <= tol {
            pivots.push((format!("ineq[{k}]"), b.clone()));
        }
    }
    if let Some(g) = p.face_gram() {
        pivots.push(("face".into(), g));
    }
    for (name, block) in &pivots {
        if let Some(s) = ws.case_a(&sol.x, block, name, tol)? {
            return Ok(s);
        }
    }

    // Case (b): every inequality strictly slack — walk the optimal face.
    let strictly_slack = p
        .ineq_blocks()
        .iter()
        .all(|b| crate::sym::inner_unchecked(b, &sol.x) < -tol);
    if strictly_slack {
        match case_b_walk(p, sol, tol, &mut ws) {
            Ok(s) => return Ok(s),
            Err(Error::NoVerifiedCandidate { mut candidates }) => {
                ws.failures.append(&mut candidates);
            }
            Err(e) => return Err(e),
        }
    }

    Err(Error::NoVerifiedCandidate {
        candidates: ws.failures,
    })
}

/// Orthonormalizes `protected` (Frobenius inner product) and returns a unit
/// direction orthogonal to all of them, preferring canonical basis elements
/// of the r×r symmetric space; falls back to a seeded random direction.
fn neutral_direction(r: usize, protected: &[SymMatrix]) -> Option<SymMatrix> {
    let mut ortho: Vec<SymMatrix> = Vec::new();
    for m in protected {
        let mut v = m.clone();
        for o in &ortho {
            let c = crate::sym::inner_unchecked(&v, o);
            v = v.sub(&o.scale(c));
        }
        let norm = v.frob_norm();
        if norm > 1e-10 {
            v = v.scale(1.0 / norm);
            ortho.push(v);
        }
    }
    let project_out = |mut v: SymMatrix| -> Option<SymMatrix> {
        for o in &ortho {
            let c = crate::sym::inner_unchecked(&v, o);
            v = v.sub(&o.scale(c));
        }
        let norm = v.frob_norm();
        (norm > 1e-8).then(|| v.scale(1.0 / norm))
    };

    for a in 0..r {
        for bidx in a..r {
            let e = SymMatrix::from_fn(r, |i, j| {
                if (i, j) == (a, bidx) || (i, j) == (bidx, a) {
                    1.0
                } else {
                    0.0
                }
            });
            if let Some(d) = project_out(e) {
                return Some(d);
            }
        }
    }
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xD15C0);
    for _ in 0..16 {
        let e = SymMatrix::from_fn(r, |_, _| rng.gen_range(-1.0..1.0));
        if let Some(d) = project_out(e) {
            return Some(d);
        }
    }
    None
}

fn case_b_walk(
    p: &ConicQcqp,
    sol: &SdpSolution,
    tol: f64,
    ws: &mut Workspace,
) -> Result<RankOneSolution> {
    let zeta = sol.primal_obj;
    let drift_cap = 1e-7 * (1.0 + zeta.abs());
    let mut x_cur = sol.x.clone();
    let n = p.n();

    for _ in 0..(n + 4) {
        let dec = x_cur.eigendecompose()?;
        let lmax = dec.eigenvalues[n - 1].max(0.0);
        let thresh = 1e-9 * lmax;
        let cols: Vec<usize> = (0..n)
            .filter(|&i| dec.eigenvalues[i] > thresh && dec.eigenvalues[i] > 0.0)
            .collect();
        let r = cols.len();
        if r <= 1 {
            let top = dec.eigenvector(n - 1) * lmax.sqrt();
            if let Some(s) = ws.try_candidate(&top, tol, "rank-reduced optimum", Provenance::CaseB)
            {
                return Ok(s);
            }
            return Err(Error::NoVerifiedCandidate {
                candidates: std::mem::take(&mut ws.failures),
            });
        }
        let v = DMatrix::from_fn(n, r, |i, j| {
            dec.eigenvectors[(i, cols[j])] * dec.eigenvalues[cols[j]].sqrt()
        });

        // directions must keep ⟨H,·⟩, every equality block and the face fixed
        let mut protected = vec![p.normalizer().congruence(&v)];
        for b in p.eq_blocks() {
            protected.push(b.congruence(&v));
        }
        if let Some(g) = p.face_gram() {
            protected.push(g.congruence(&v));
        }
        let delta = neutral_direction(r, &protected).ok_or_else(|| {
            Error::RankReductionStall("no feasible-neutral direction in the factor space".into())
        })?;

        let d_obj = crate::sym::inner_unchecked(&p.objective().congruence(&v), &delta);
        let signs: [f64; 2] = if d_obj > 0.0 { [-1.0, 1.0] } else { [1.0, -1.0] };

        let mut stepped = false;
        'signs: for sgn in signs {
            let dir = delta.scale(sgn);
            // blocking step from the eigenvalues of I + αΔ
            let dmin = dir.min_eig()?;
            let alpha_eig = if dmin < -1e-12 { 1.0 / (-dmin) } else { f64::INFINITY };
            // blocking step from the slack inequalities
            let mut alpha_ineq = f64::INFINITY;
            let mut blocker: Option<usize> = None;
            for (k, b) in p.ineq_blocks().iter().enumerate() {
                let c = crate::sym::inner_unchecked(b, &x_cur);
                let d = crate::sym::inner_unchecked(&b.congruence(&v), &dir);
                if d > 1e-12 {
                    let a = -c / d;
                    if a < alpha_ineq {
                        alpha_ineq = a;
                        blocker = Some(k);
                    }
                }
            }
            let alpha = alpha_eig.min(alpha_ineq);
            if !alpha.is_finite() {
                continue 'signs;
            }
            if alpha * d_obj.abs() > drift_cap {
                continue 'signs;
            }
            let inner = DMatrix::identity(r, r) + dir.as_matrix() * alpha;
            let x_new = SymMatrix::symmetrized(&v * inner * v.transpose());

            if alpha_ineq <= alpha_eig {
                // a slack constraint became active: pivot on it
                let k = blocker.expect("blocking index recorded");
                let block = p.ineq_blocks()[k].clone();
                if let Some(s) = ws.case_a(&x_new, &block, &format!("ineq[{k}]"), tol)? {
                    return Ok(s);
                }
                return Err(Error::NoVerifiedCandidate {
                    candidates: std::mem::take(&mut ws.failures),
                });
            }
            x_cur = x_new;
            stepped = true;
            break 'signs;
        }
        if !stepped {
            return Err(Error::RankReductionStall(
                "no blocking step in either direction".into(),
            ));
        }
        let drift = (crate::sym::inner_unchecked(p.objective(), &x_cur) - zeta).abs();
        if drift > 4.0 * drift_cap {
            return Err(Error::RankReductionStall(format!(
                "objective drifted by {drift:.3e} during the walk"
            )));
        }
    }
    Err(Error::RankReductionStall("iteration cap exceeded".into()))
}

// --- unions ------------------------------------------------------------------------

/// Solves each branch of a union of problems sharing (Q, H), recovers a
/// verified rank-1 point per feasible branch, and returns the minimum.
/// Infeasible branches contribute +∞; if every branch is infeasible the
/// union is infeasible. Branch failures other than infeasibility propagate
/// with the branch index.
pub fn solve_union(
    problems: &[ConicQcqp],
    opts: &SolverOptions,
    tol: f64,
) -> Result<UnionSolution> {
    if problems.is_empty() {
        return Err(Error::InvalidParameter("empty union".into()));
    }
    let q0 = problems[0].objective();
    let h0 = problems[0].normalizer();
    for (i, p) in problems.iter().enumerate().skip(1) {
        if p.n() != problems[0].n()
            || p.objective().sub(q0).frob_norm() > 1e-12 * (1.0 + q0.frob_norm())
            || p.normalizer().sub(h0).frob_norm() > 1e-12 * (1.0 + h0.frob_norm())
        {
            return Err(Error::InvalidParameter(format!(
                "branch {i} does not share (Q, H) with branch 0"
            )));
        }
    }

    let mut branch_values: Vec<Option<f64>> = Vec::with_capacity(problems.len());
    let mut best: Option<(f64, usize, RankOneSolution)> = None;
    for (i, p) in problems.iter().enumerate() {
        let sol = sdp::solve(p, opts);
        match sol.status {
            SolveStatus::PrimalInfeasible => {
                branch_values.push(None);
                continue;
            }
            SolveStatus::Optimal => {
                let rec = recover(p, &sol, tol).map_err(|e| Error::SolverFailure {
                    status: "recovery".into(),
                    context: format!("branch {i}: {e}"),
                })?;
                branch_values.push(Some(rec.objective));
                let better = match &best {
                    None => true,
                    Some((v, _, _)) => rec.objective < *v,
                };
                if better {
                    best = Some((rec.objective, i, rec));
                }
            }
            other => {
                return Err(Error::SolverFailure {
                    status: other.to_string(),
                    context: format!("branch {i}"),
                });
            }
        }
    }
    match best {
        Some((value, branch, solution)) => Ok(UnionSolution {
            value,
            branch,
            solution,
            branch_values,
        }),
        None => Err(Error::UnionInfeasible),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag(d: &[f64]) -> SymMatrix {
        SymMatrix::from_diagonal(d)
    }

    fn reconstruct(vectors: &[DVector<f64>], n: usize) -> SymMatrix {
        let mut acc = DMatrix::<f64>::zeros(n, n);
        for v in vectors {
            acc += v * v.transpose();
        }
        SymMatrix::symmetrized(acc)
    }

    #[test]
    fn sturm_identity_against_indefinite_form() {
        let x = SymMatrix::identity(2);
        let b = diag(&[1.0, -1.0]);
        let out = sturm_decompose(&x, &b, 1e-10).unwrap();
        assert_eq!(out.vectors.len(), 2);
        assert_eq!(out.rotations, 1);
        for v in &out.vectors {
            assert!(b.quad_form(v).abs() <= 1e-10);
        }
        let err = reconstruct(&out.vectors, 2).sub(&x).frob_norm();
        assert!(err <= 1e-10);
    }

    #[test]
    fn sturm_rank_one_passthrough() {
        let v = DVector::from_row_slice(&[1.0, 2.0]);
        let x = SymMatrix::outer(&v);
        let b = diag(&[-1.0, -1.0]);
        let out = sturm_decompose(&x, &b, 1e-10).unwrap();
        assert_eq!(out.vectors.len(), 1);
        assert_eq!(out.rotations, 0);
    }

    #[test]
    fn sturm_no_rotation_when_signs_agree() {
        let x = diag(&[2.0, 1.0]);
        let b = diag(&[-1.0, -1.0]);
        let out = sturm_decompose(&x, &b, 1e-10).unwrap();
        assert_eq!(out.rotations, 0);
        for v in &out.vectors {
            assert!(b.quad_form(v) < 0.0);
        }
    }

    #[test]
    fn sturm_rejects_bad_input() {
        assert!(sturm_decompose(&diag(&[1.0, -0.5]), &diag(&[0.0, 0.0]), 1e-9).is_err());
        assert!(sturm_decompose(&diag(&[1.0, 1.0]), &diag(&[1.0, 1.0]), 1e-9).is_err());
    }

    #[test]
    fn sturm_random_property() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for trial in 0..60 {
            let n = rng.gen_range(2..9usize);
            let r = rng.gen_range(1..=n.min(6));
            let g = DMatrix::<f64>::from_fn(n, r, |_, _| rng.gen_range(-1.0..1.0));
            let x = SymMatrix::symmetrized(&g * g.transpose());
            let mut b = SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let equality_case = trial % 2 == 0;
            if equality_case {
                // shift so that ⟨B,X⟩ = 0 exactly
                let shift = crate::sym::inner_unchecked(&b, &x) / x.as_matrix().trace();
                b = b.add_scaled_identity(-shift);
            } else if crate::sym::inner_unchecked(&b, &x) > 0.0 {
                b = b.neg();
            }
            let out = sturm_decompose(&x, &b, 1e-8).unwrap();
            let err = reconstruct(&out.vectors, n).sub(&x).frob_norm();
            assert!(err <= 1e-8 * (1.0 + x.frob_norm()));
            assert!(out.rotations + 1 <= out.vectors.len().max(1));
            for v in &out.vectors {
                let f = b.quad_form(v);
                assert!(f <= 1e-8, "component form {f}");
                if equality_case {
                    assert!(f >= -1e-8, "equality component form {f}");
                }
            }
        }
    }

    fn solve_and_recover(p: &ConicQcqp) -> RankOneSolution {
        let sol = sdp::solve(p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        recover(p, &sol, 1e-6).unwrap()
    }

    #[test]
    fn recover_rank_one_directly() {
        // equality pins X = e₂e₂ᵀ; feasible set of the QCQP is x = (0, ±1)
        let p = ConicQcqp::new(
            diag(&[3.0, 5.0]),
            SymMatrix::identity(2),
            vec![diag(&[1.0, 0.0])],
            vec![],
        )
        .unwrap();
        let r = solve_and_recover(&p);
        assert!(r.verified);
        assert_abs_diff_eq!(r.objective, 5.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.x[1].abs(), 1.0, epsilon = 1e-5);
    }

    #[test]
    fn recover_active_constraint_split() {
        // optimum X = I/2 with ⟨diag(1,−1),X⟩ = 0 active; components of the
        // split are (1, ±1)/√2
        let p = ConicQcqp::new(
            diag(&[-1.0, 1.0]),
            SymMatrix::identity(2),
            vec![],
            vec![diag(&[1.0, -1.0])],
        )
        .unwrap();
        let r = solve_and_recover(&p);
        assert!(r.verified);
        assert_abs_diff_eq!(r.objective, 0.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.x[0].abs(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-4);
    }

    #[test]
    fn recover_degenerate_objective_via_walk() {
        // every feasible X is optimal; the walk must land on a feasible
        // rank-1 point with x̂ᵀx̂ = 1
        let p = ConicQcqp::new(
            SymMatrix::identity(2),
            SymMatrix::identity(2),
            vec![],
            vec![diag(&[1.0, -1.0])],
        )
        .unwrap();
        let r = solve_and_recover(&p);
        assert!(r.verified);
        assert_abs_diff_eq!(r.objective, 1.0, epsilon = 1e-5);
        let x = r.x_vector();
        assert!(diag(&[1.0, -1.0]).quad_form(&x) <= 1e-6);
    }

    #[test]
    fn recover_homogenized_interval_problem() {
        // lifted single-inequality problem with optimum −1/2 at x = (1/√2, 0)
        let p = ConicQcqp::new(
            diag(&[-1.0, 0.0]),
            diag(&[2.0, 1.0]),
            vec![],
            vec![diag(&[-1.0, -1.0])],
        )
        .unwrap();
        let r = solve_and_recover(&p);
        assert!(r.verified);
        assert_abs_diff_eq!(r.objective, -0.5, epsilon = 1e-5);
        assert_abs_diff_eq!(r.x[0].abs(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-4);
    }

    #[test]
    fn sign_symmetry_of_verification() {
        let p = ConicQcqp::new(
            diag(&[3.0, 5.0]),
            SymMatrix::identity(2),
            vec![diag(&[1.0, 0.0])],
            vec![],
        )
        .unwrap();
        let r = solve_and_recover(&p);
        let flipped = -r.x_vector();
        let rep = residual_report(&p, &flipped, r.objective);
        assert!(report_passes(&rep, r.objective));
    }

    #[test]
    fn union_two_coordinate_faces() {
        let q = diag(&[3.0, 5.0]);
        let h = SymMatrix::identity(2);
        let b1 = ConicQcqp::new(q.clone(), h.clone(), vec![diag(&[1.0, 0.0])], vec![]).unwrap();
        let b2 = ConicQcqp::new(q.clone(), h.clone(), vec![diag(&[0.0, 1.0])], vec![]).unwrap();
        let u = solve_union(&[b1, b2], &SolverOptions::default(), 1e-6).unwrap();
        assert_eq!(u.branch, 1);
        assert_abs_diff_eq!(u.value, 3.0, epsilon = 1e-5);
        assert_abs_diff_eq!(u.solution.x[0].abs(), 1.0, epsilon = 1e-5);
        assert_eq!(u.branch_values.len(), 2);
    }

    #[test]
    fn union_skips_infeasible_branch() {
        let q = diag(&[3.0, 5.0]);
        let h = SymMatrix::identity(2);
        let infeasible =
            ConicQcqp::new(q.clone(), h.clone(), vec![SymMatrix::identity(2)], vec![]).unwrap();
        let fine = ConicQcqp::new(q.clone(), h.clone(), vec![diag(&[0.0, 1.0])], vec![]).unwrap();
        let u = solve_union(&[infeasible.clone(), fine], &SolverOptions::default(), 1e-6).unwrap();
        assert_eq!(u.branch, 1);
        assert_abs_diff_eq!(u.value, 3.0, epsilon = 1e-5);
        assert_eq!(u.branch_values[0], None);

        let err = solve_union(
            &[infeasible.clone(), infeasible],
            &SolverOptions::default(),
            1e-6,
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnionInfeasible));
    }
}
