//! Exactness certificates for the SDP relaxation.
//!
//! For inequality blocks B_1..B_m the relaxation is tight for every
//! objective as soon as the kernel slice {X ⪰ 0 : ⟨B_k,X⟩ = 0} of each
//! block stays inside the feasible cone of all the others. Three sufficient
//! tests of increasing strength and cost decide this:
//!
//! 1. **pairwise-psd** — −(B_k + B_ℓ) ⪰ 0 for every unordered pair;
//! 2. **tau-linesearch** — −B_ℓ − τB_k ⪰ 0 for some τ, per ordered pair;
//! 3. **subset-direct** — the inclusion itself, decided by maximizing
//!    ⟨B_ℓ,X⟩ over {X ⪰ 0, ⟨B_k,X⟩ = 0, trace X = 1}.
//!
//! (1) is (2) at τ = 1, and (2) implies (3); (3) is decisive up to solver
//! tolerance and catches inclusions that hold only in the closure, where no
//! finite τ exists. Equality blocks join either by dual-cone membership
//! (the constraint then carves a face and can be set aside) or by the
//! inequality-pair encoding {B, −B}.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::Error;
use crate::model::ConicQcqp;
use crate::sdp::{self, SolveStatus, SolverOptions};
use crate::sym::SymMatrix;
use crate::Result;

/// Which condition certified the problem (or failed to).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// At most one constraint: the inclusion holds by itself.
    TriviallyExact,
    ExactByPairwisePSD,
    ExactByTauLineSearch,
    ExactByDirectSubsetTest,
    /// A test could not be decided cleanly (borderline margins).
    Inconclusive,
    /// The direct test failed for some pair. The sufficient condition does
    /// not hold; exactness is NOT disproved.
    ConditionFails,
}

/// Identifies a constraint in certificate evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintRef {
    Ineq(usize),
    /// Equality block j encoded as +B_j.
    EqPlus(usize),
    /// Equality block j encoded as −B_j.
    EqMinus(usize),
}

fn label(r: ConstraintRef) -> String {
    match r {
        ConstraintRef::Ineq(i) => format!("ineq[{i}]"),
        ConstraintRef::EqPlus(j) => format!("eq[{j}]+"),
        ConstraintRef::EqMinus(j) => format!("eq[{j}]-"),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairEvidence {
    pub k: String,
    pub l: String,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<f64>,
    pub holds: bool,
}

/// Outcome of the exactness checks, with per-pair numeric evidence.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub pairs: Vec<PairEvidence>,
    /// Constraints flagged redundant by a τ ≤ 0 witness.
    pub redundant: Vec<String>,
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        matches!(
            self.verdict,
            Verdict::TriviallyExact
                | Verdict::ExactByPairwisePSD
                | Verdict::ExactByTauLineSearch
                | Verdict::ExactByDirectSubsetTest
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("certificate serializes")
    }
}

/// Result of the τ line search for one ordered pair.
#[derive(Debug, Clone, Copy)]
pub struct TauSearch {
    pub found: bool,
    pub tau: f64,
    pub margin: f64,
    /// True when some τ ≤ 0 already gives a PSD combination; the ℓ
    /// constraint is then implied by the k constraint alone.
    pub redundant: bool,
}

/// Result of the direct inclusion test for one ordered pair.
#[derive(Debug, Clone, Copy)]
pub struct SubsetTest {
    pub holds: bool,
    /// max ⟨B_ℓ,X⟩ over the trace-1 slice of the kernel set of B_k;
    /// `None` when that set is {O} and the inclusion is vacuous.
    pub witness: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct Membership {
    pub member: bool,
    /// Frobenius distance achieved by the inner solver.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SlaterCheck {
    pub holds: bool,
    pub t: f64,
    pub margin: f64,
}

// --- 1-d concave maximization ----------------------------------------------

struct Concave1d {
    arg: f64,
    val: f64,
    bracketed: bool,
}

/// Maximizes a concave function by bracket expansion (doubling, capped)
/// followed by golden-section refinement. Tracks the best sample seen so a
/// caller can still reason about unbracketed (monotone) cases.
fn maximize_concave(
    f: &mut impl FnMut(f64) -> f64,
    half_width: f64,
    max_expand: usize,
) -> Concave1d {
    let mut a = -half_width;
    let mut b = half_width;
    let mut c = 0.0;
    let (mut fa, mut fc, mut fb) = (f(a), f(c), f(b));
    let mut best = (c, fc);
    if fa > best.1 {
        best = (a, fa);
    }
    if fb > best.1 {
        best = (b, fb);
    }

    let mut expansions = 0;
    let bracketed = loop {
        let eps = 1e-13 * (1.0 + fc.abs());
        if fb > fc + eps {
            let w = b - c;
            a = c;
            fa = fc;
            c = b;
            fc = fb;
            b = c + 2.0 * w;
            fb = f(b);
            if fb > best.1 {
                best = (b, fb);
            }
        } else if fa > fc + eps {
            let w = c - a;
            b = c;
            fb = fc;
            c = a;
            fc = fa;
            a = c - 2.0 * w;
            fa = f(a);
            if fa > best.1 {
                best = (a, fa);
            }
        } else {
            break true;
        }
        expansions += 1;
        if expansions > max_expand {
            break false;
        }
    };

    if bracketed {
        const INVPHI: f64 = 0.618_033_988_749_894_8;
        let mut lo = a;
        let mut hi = b;
        let mut x1 = hi - INVPHI * (hi - lo);
        let mut x2 = lo + INVPHI * (hi - lo);
        let mut f1 = f(x1);
        let mut f2 = f(x2);
        for _ in 0..240 {
            if f1 > best.1 {
                best = (x1, f1);
            }
            if f2 > best.1 {
                best = (x2, f2);
            }
            if (hi - lo).abs() <= 1e-12 * (1.0 + lo.abs() + hi.abs()) {
                break;
            }
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - INVPHI * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + INVPHI * (hi - lo);
                f2 = f(x2);
            }
        }
    }

    Concave1d {
        arg: best.0,
        val: best.1,
        bracketed,
    }
}

// --- per-pair checks --------------------------------------------------------

fn check_same_dims(a: &SymMatrix, b: &SymMatrix, context: &'static str) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            context,
            expected: a.n(),
            got: b.n(),
        });
    }
    Ok(())
}

/// Searches for τ with −B_ℓ − τ·B_k ⪰ −tol·I. The margin
/// f(τ) = λ_min(−B_ℓ − τB_k) is concave in τ.
///
/// A semidefinite B_k makes f monotone with supremum λ_min of −B_ℓ on
/// ker B_k, attained at finite τ only when strictly positive; that case is
/// handled by the kernel argument and bounded sampling. Chasing the
/// supremum to τ → ∞ would accept closure-only inclusions that this
/// condition is meant to exclude, so sampling stops at a bounded τ (the
/// test is conservative for cross terms below roughly 1e-3 of scale).
pub fn check_tau_linesearch(bk: &SymMatrix, bl: &SymMatrix, tol: f64) -> Result<TauSearch> {
    check_same_dims(bk, bl, "check_tau_linesearch")?;
    let neg_bl = bl.neg();
    let f_at = |tau: f64| -> Result<f64> { neg_bl.sub(&bk.scale(tau)).min_eig() };

    let nb = bk.frob_norm();
    if nb <= 1e-12 * (1.0 + bl.frob_norm()) {
        let m0 = neg_bl.min_eig()?;
        let found = m0 >= -tol;
        return Ok(TauSearch {
            found,
            tau: 0.0,
            margin: m0,
            redundant: found,
        });
    }

    let dec = bk.eigendecompose()?;
    let lmin = dec.eigenvalues[0];
    let lmax = dec.eigenvalues[dec.eigenvalues.len() - 1];
    let eps_c = 1e-10 * (1.0 + nb);
    let tau0 = 1.0 + bl.frob_norm() / nb.max(1e-12);

    if lmin >= -eps_c || lmax <= eps_c {
        // τ·(−B_k) adds a PSD term exactly in the `sign` direction
        let sign = if lmax <= eps_c { 1.0 } else { -1.0 };
        let kernel = dec.kernel_basis(eps_c);
        let m0 = f_at(0.0)?;
        if kernel.ncols() == 0 {
            // definite: f grows without bound in the sign direction
            let gap = (-m0).max(0.0) + 1.0;
            let lam_small = lmin.abs().min(lmax.abs()).max(1e-300);
            let tau = sign * gap / lam_small;
            let margin = f_at(tau)?;
            return Ok(TauSearch {
                found: true,
                tau,
                margin,
                redundant: tau <= 0.0 || m0 >= -tol,
            });
        }
        let sup = neg_bl.congruence(&kernel).min_eig()?;
        if sup > tol {
            // strictly positive kernel margin: some finite τ is PSD; double
            // until halfway to the supremum
            let target = (sup - tol.max(0.0)) / 2.0;
            let mut tau = sign * tau0;
            for _ in 0..200 {
                let m = f_at(tau)?;
                if m >= target && m >= -tol {
                    return Ok(TauSearch {
                        found: true,
                        tau,
                        margin: m,
                        redundant: tau <= 0.0 || m0 >= -tol,
                    });
                }
                tau *= 2.0;
            }
            return Err(Error::LineSearchFailure("doubling cap exceeded"));
        }
        // sup ≤ tol: evaluate at a bounded τ; an attained flat maximum shows
        // up there, a closure-only limit stays below −tol
        let tau_hard = sign * tau0 * (1u64 << 20) as f64;
        let m_hard = f_at(tau_hard)?;
        let (tau, margin) = if m0 >= m_hard { (0.0, m0) } else { (tau_hard, m_hard) };
        let found = margin >= -tol;
        return Ok(TauSearch {
            found,
            tau,
            margin,
            redundant: found && (m0 >= -tol || tau <= 0.0),
        });
    }

    // indefinite B_k: f → −∞ on both sides, the maximum is attained
    let mut err = None;
    let mut f_clamped = |tau: f64| -> f64 {
        match f_at(tau) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NEG_INFINITY
            }
        }
    };
    let out = maximize_concave(&mut f_clamped, tau0, 60);
    if let Some(e) = err {
        return Err(e);
    }
    let found = if out.bracketed {
        out.val >= -tol
    } else {
        out.val > tol.max(0.0)
    };
    let m0 = f_at(0.0)?;
    Ok(TauSearch {
        found,
        tau: out.arg,
        margin: out.val,
        redundant: found && (out.arg <= 0.0 || m0 >= -tol),
    })
}

/// Decides the inclusion {X ⪰ 0 : ⟨B_k,X⟩ = 0} ⊆ {⟨B_ℓ,X⟩ ≤ 0} directly,
/// on the trace-1 slice (both sets are cones, so the slice decides).
pub fn check_subset_direct(bk: &SymMatrix, bl: &SymMatrix, tol: f64) -> Result<SubsetTest> {
    check_same_dims(bk, bl, "check_subset_direct")?;
    let dec = bk.eigendecompose()?;
    let n = bk.n();
    let lmin = dec.eigenvalues[0];
    let lmax = dec.eigenvalues[n - 1];
    let eps_c = 1e-10 * (1.0 + bk.frob_norm());

    if lmin >= -eps_c || lmax <= eps_c {
        // semidefinite pivot: the kernel set is the face X = UZUᵀ, Z ⪰ 0,
        // and the maximum of ⟨B_ℓ,X⟩ on its trace-1 slice is λ_max(UᵀB_ℓU)
        let kernel = dec.kernel_basis(eps_c);
        if kernel.ncols() == 0 {
            return Ok(SubsetTest {
                holds: true,
                witness: None,
            });
        }
        let witness = bl.congruence(&kernel).max_eig()?;
        return Ok(SubsetTest {
            holds: witness <= tol,
            witness: Some(witness),
        });
    }

    // indefinite pivot: the slice has interior points; solve the SDP
    let sol = sdp::solve_feasibility(
        bl,
        &[bk.clone()],
        &[],
        &SymMatrix::identity(n),
        &SolverOptions::default(),
    )?;
    match sol.status {
        SolveStatus::Optimal => Ok(SubsetTest {
            holds: sol.primal_obj <= tol,
            witness: Some(sol.primal_obj),
        }),
        other => Err(Error::SolverFailure {
            status: other.to_string(),
            context: "subset-direct auxiliary SDP".into(),
        }),
    }
}

/// Pairwise-sum certificate over a block list: −(B_k + B_ℓ) ⪰ −tol·I for
/// every unordered pair. With m ≤ 1 blocks the inclusion condition holds by
/// itself.
pub fn check_pairwise_sum(blocks: &[SymMatrix], tol: f64) -> Result<Certificate> {
    for b in blocks.iter().skip(1) {
        check_same_dims(&blocks[0], b, "check_pairwise_sum")?;
    }
    if blocks.len() <= 1 {
        return Ok(Certificate {
            verdict: Verdict::TriviallyExact,
            pairs: Vec::new(),
            redundant: Vec::new(),
            notes: vec!["at most one constraint".into()],
        });
    }
    let mut pairs = Vec::new();
    let mut all = true;
    for k in 0..blocks.len() {
        for l in k + 1..blocks.len() {
            let margin = blocks[k].add(&blocks[l]).neg().min_eig()?;
            let holds = margin >= -tol;
            all &= holds;
            pairs.push(PairEvidence {
                k: format!("ineq[{k}]"),
                l: format!("ineq[{l}]"),
                method: "pairwise-psd".into(),
                tau: None,
                margin: Some(margin),
                witness: None,
                holds,
            });
        }
    }
    Ok(Certificate {
        verdict: if all {
            Verdict::ExactByPairwisePSD
        } else {
            Verdict::ConditionFails
        },
        pairs,
        redundant: Vec::new(),
        notes: Vec::new(),
    })
}

// --- dual-cone membership ---------------------------------------------------

/// Negative part M − Π_PSD(M) and its Frobenius norm.
fn negative_part(m: &SymMatrix) -> Result<(SymMatrix, f64)> {
    let dec = m.eigendecompose()?;
    let n = m.n();
    let mut acc = nalgebra::DMatrix::<f64>::zeros(n, n);
    let mut norm2 = 0.0;
    for i in 0..n {
        let l = dec.eigenvalues[i];
        if l < 0.0 {
            let v = dec.eigenvector(i);
            acc += &v * v.transpose() * l;
            norm2 += l * l;
        }
    }
    Ok((SymMatrix::symmetrized(acc), norm2.sqrt()))
}

/// min ‖B − Σ yᵢGᵢ − Y‖_F over Y ⪰ 0 with sign constraints on y, by
/// accelerated projected gradient on y (for fixed y the optimal Y is the
/// PSD projection, so the objective is the distance of B − Σ yᵢGᵢ to the
/// cone). `free[i]` marks unconstrained multipliers; the rest need y ≤ 0.
fn distance_to_generated_cone(
    b: &SymMatrix,
    gens: &[SymMatrix],
    free: &[bool],
    tol: f64,
) -> Result<f64> {
    if gens.is_empty() {
        let (_, d) = negative_part(b)?;
        return Ok(d);
    }
    let g = gens.len();
    let gram = SymMatrix::from_fn(g, |i, j| crate::sym::inner_unchecked(&gens[i], &gens[j]));
    let lip = gram.max_eig()?.max(1e-12);

    let project = |y: &mut DVector<f64>| {
        for i in 0..g {
            if !free[i] && y[i] > 0.0 {
                y[i] = 0.0;
            }
        }
    };

    let residual_at = |y: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
        let mut m = b.clone();
        for i in 0..g {
            m = m.sub(&gens[i].scale(y[i]));
        }
        let (neg, d) = negative_part(&m)?;
        let grad = DVector::from_fn(g, |i, _| -crate::sym::inner_unchecked(&neg, &gens[i]));
        Ok((d, grad))
    };

    let mut y = DVector::<f64>::zeros(g);
    let mut v = y.clone();
    let mut theta = 1.0f64;
    let mut last = f64::INFINITY;
    for it in 0..3000 {
        let (_, grad) = residual_at(&v)?;
        let mut y_new = &v - grad / lip;
        project(&mut y_new);
        let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        v = &y_new + (&y_new - &y) * ((theta - 1.0) / theta_new);
        let step = (&y_new - &y).norm();
        y = y_new;
        theta = theta_new;
        let settled = step <= 1e-13 * (1.0 + y.norm()) && it > 5;
        if it % 25 == 0 || settled {
            let (d, _) = residual_at(&y)?;
            if d <= 0.01 * tol || settled {
                break;
            }
            if (last - d).abs() <= 1e-15 * (1.0 + d) && it > 200 {
                break;
            }
            last = d;
        }
    }
    let (d, _) = residual_at(&y)?;
    Ok(d)
}

fn membership_over(
    b: &SymMatrix,
    gens: &[SymMatrix],
    free: &[bool],
    tol: f64,
) -> Result<Membership> {
    // every PSD matrix is in the dual cone
    if b.min_eig()? >= -1e-12 * (1.0 + b.frob_norm()) {
        return Ok(Membership {
            member: true,
            residual: 0.0,
        });
    }
    // B = −B_ℓ for an inequality generator, or ±B_j for an equality one
    for (i, g) in gens.iter().enumerate() {
        let scale = 1e-12 * (1.0 + b.frob_norm());
        if b.add(g).frob_norm() <= scale || (free[i] && b.sub(g).frob_norm() <= scale) {
            return Ok(Membership {
                member: true,
                residual: 0.0,
            });
        }
    }
    let residual = distance_to_generated_cone(b, gens, free, tol)?;
    Ok(Membership {
        member: residual <= tol,
        residual,
    })
}

/// Decides B ∈ J* for the dual cone of J = {X ⪰ 0, ⟨B_j,X⟩ = 0 (equalities
/// and face), ⟨B_k,X⟩ ≤ 0}, i.e. membership in
/// cl{Y + Σ B_j y_j + Σ B_k y_k : Y ⪰ 0, y_j free, y_k ≤ 0}, by Frobenius
/// distance minimization. The residual cannot distinguish boundary members
/// of the closure from near-members; the caller sees the margin.
pub fn check_dual_membership(b: &SymMatrix, p: &ConicQcqp, tol: f64) -> Result<Membership> {
    if b.n() != p.n() {
        return Err(Error::DimensionMismatch {
            context: "check_dual_membership",
            expected: p.n(),
            got: b.n(),
        });
    }
    let mut gens: Vec<SymMatrix> = Vec::new();
    let mut free: Vec<bool> = Vec::new();
    for e in p.eq_blocks() {
        gens.push(e.clone());
        free.push(true);
    }
    if let Some(g) = p.face_gram() {
        gens.push(g);
        free.push(true);
    }
    for k in p.ineq_blocks() {
        gens.push(k.clone());
        free.push(false);
    }
    membership_over(b, &gens, &free, tol)
}

/// Verifiable sufficient form of dual strict feasibility: Q − tH ≻ tol·I
/// for some t, decided by maximizing the concave margin
/// g(t) = λ_min(Q − tH).
pub fn check_dual_slater(p: &ConicQcqp, tol: f64) -> Result<SlaterCheck> {
    let q = p.objective();
    let h = p.normalizer();
    let mut err = None;
    let mut g = |t: f64| -> f64 {
        match q.sub(&h.scale(t)).min_eig() {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NEG_INFINITY
            }
        }
    };
    let half = 1.0 + q.frob_norm() / h.frob_norm().max(1e-12);
    let out = maximize_concave(&mut g, half, 60);
    if let Some(e) = err {
        return Err(e);
    }
    Ok(SlaterCheck {
        holds: out.val > tol,
        t: out.arg,
        margin: out.val,
    })
}

// --- orchestration ------------------------------------------------------------

/// Runs the full decision procedure on a problem:
///
/// 0. zero or one constraint → trivially exact; each equality block is set
///    aside when it (or its negation) lies in the dual cone of the rest
///    (it then carves a face), otherwise pair-encoded as {B, −B};
/// 1. pairwise-psd over the working list;
/// 2. otherwise τ line search over all ordered pairs;
/// 3. otherwise the direct inclusion test over all ordered pairs.
///
/// The verdict is the strongest condition that fully holds. A failed direct
/// test yields `ConditionFails` (the sufficient condition failed —
/// exactness is not disproved); borderline failures yield `Inconclusive`.
/// The attached face, a face of the PSD cone, never needs certification.
pub fn certify_exactness(p: &ConicQcqp, tol: f64) -> Result<Certificate> {
    let m_raw = p.eq_blocks().len() + p.ineq_blocks().len();
    let mut notes = Vec::new();
    if p.face_rows().is_some() {
        notes.push("face constraint carves a PSD-cone face; no test needed".into());
    }
    if m_raw <= 1 {
        notes.push("at most one constraint".into());
        return Ok(Certificate {
            verdict: Verdict::TriviallyExact,
            pairs: Vec::new(),
            redundant: Vec::new(),
            notes,
        });
    }

    // Step 0: route equality blocks.
    let mut list: Vec<(ConstraintRef, SymMatrix)> = p
        .ineq_blocks()
        .iter()
        .enumerate()
        .map(|(i, b)| (ConstraintRef::Ineq(i), b.clone()))
        .collect();
    let mut accum_eq: Vec<SymMatrix> = Vec::new();
    if let Some(g) = p.face_gram() {
        accum_eq.push(g);
    }
    for (j, b) in p.eq_blocks().iter().enumerate() {
        let mut gens: Vec<SymMatrix> = accum_eq.clone();
        let mut free = vec![true; gens.len()];
        for bk in p.ineq_blocks() {
            gens.push(bk.clone());
            free.push(false);
        }
        let fwd = membership_over(b, &gens, &free, tol)?;
        let bwd = if fwd.member {
            fwd
        } else {
            membership_over(&b.neg(), &gens, &free, tol)?
        };
        if fwd.member || bwd.member {
            notes.push(format!(
                "eq[{j}] set aside: lies in the dual cone (residual {:.2e})",
                fwd.residual.min(bwd.residual)
            ));
            accum_eq.push(b.clone());
        } else {
            notes.push(format!(
                "eq[{j}] pair-encoded as two inequalities (membership residual {:.2e})",
                fwd.residual.min(bwd.residual)
            ));
            list.push((ConstraintRef::EqPlus(j), b.clone()));
            list.push((ConstraintRef::EqMinus(j), b.neg()));
        }
    }

    let mut pairs: Vec<PairEvidence> = Vec::new();
    let mut redundant: Vec<String> = Vec::new();

    if list.len() <= 1 {
        notes.push("working list reduced to at most one constraint".into());
        return Ok(Certificate {
            verdict: Verdict::ExactByPairwisePSD,
            pairs,
            redundant,
            notes,
        });
    }

    // Stage 1: pairwise sums.
    let mut stage1 = true;
    for k in 0..list.len() {
        for l in k + 1..list.len() {
            let margin = list[k].1.add(&list[l].1).neg().min_eig()?;
            let holds = margin >= -tol;
            stage1 &= holds;
            pairs.push(PairEvidence {
                k: label(list[k].0),
                l: label(list[l].0),
                method: "pairwise-psd".into(),
                tau: None,
                margin: Some(margin),
                witness: None,
                holds,
            });
        }
    }
    if stage1 {
        return Ok(Certificate {
            verdict: Verdict::ExactByPairwisePSD,
            pairs,
            redundant,
            notes,
        });
    }

    // Stage 2: τ line search, ordered pairs.
    let mut stage2 = true;
    for k in 0..list.len() {
        for l in 0..list.len() {
            if k == l {
                continue;
            }
            let ts = check_tau_linesearch(&list[k].1, &list[l].1, tol)?;
            stage2 &= ts.found;
            if ts.found && ts.redundant {
                let lab = label(list[l].0);
                if !redundant.contains(&lab) {
                    redundant.push(lab);
                }
            }
            pairs.push(PairEvidence {
                k: label(list[k].0),
                l: label(list[l].0),
                method: "tau-linesearch".into(),
                tau: Some(ts.tau),
                margin: Some(ts.margin),
                witness: None,
                holds: ts.found,
            });
        }
    }
    if stage2 {
        return Ok(Certificate {
            verdict: Verdict::ExactByTauLineSearch,
            pairs,
            redundant,
            notes,
        });
    }

    // Stage 3: direct inclusion, ordered pairs.
    let mut stage3 = true;
    let mut worst_excess: f64 = 0.0;
    for k in 0..list.len() {
        for l in 0..list.len() {
            if k == l {
                continue;
            }
            let st = check_subset_direct(&list[k].1, &list[l].1, tol)?;
            stage3 &= st.holds;
            if !st.holds {
                if let Some(w) = st.witness {
                    worst_excess = worst_excess.max(w);
                }
            }
            pairs.push(PairEvidence {
                k: label(list[k].0),
                l: label(list[l].0),
                method: "subset-direct".into(),
                tau: None,
                margin: None,
                witness: st.witness,
                holds: st.holds,
            });
        }
    }
    let verdict = if stage3 {
        Verdict::ExactByDirectSubsetTest
    } else if worst_excess > 100.0 * tol {
        Verdict::ConditionFails
    } else {
        Verdict::Inconclusive
    };
    Ok(Certificate {
        verdict,
        pairs,
        redundant,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), 1e-12).unwrap()
    }

    fn diag(d: &[f64]) -> SymMatrix {
        SymMatrix::from_diagonal(d)
    }

    /// Blocks of the ball-removal family: range −1 ≤ u_ℓ ≤ 1 plus
    /// ‖u‖²/γ ≥ γ, lifted to ℝ^{ℓ+1}.
    fn ball_removal_blocks(l: usize, gamma: f64) -> Vec<SymMatrix> {
        let n = l + 1;
        let mut b1 = vec![vec![0.0; n]; n];
        b1[l - 1][l] = -0.5;
        b1[l][l - 1] = -0.5;
        b1[l][l] = -1.0;
        let mut b2 = vec![vec![0.0; n]; n];
        b2[l - 1][l] = 0.5;
        b2[l][l - 1] = 0.5;
        b2[l][l] = -1.0;
        let mut b3 = vec![vec![0.0; n]; n];
        for i in 0..l {
            b3[i][i] = -1.0 / gamma;
        }
        b3[l][l] = gamma;
        vec![
            SymMatrix::from_rows(&b1, 1e-12).unwrap(),
            SymMatrix::from_rows(&b2, 1e-12).unwrap(),
            SymMatrix::from_rows(&b3, 1e-12).unwrap(),
        ]
    }

    #[test]
    fn pairwise_on_equality_pair_device() {
        // {B₁, −B₁}: −(B₁ + (−B₁)) = O ⪰ 0
        let b = diag(&[1.0, 0.0]);
        let cert = check_pairwise_sum(&[b.clone(), b.neg()], 1e-9).unwrap();
        assert_eq!(cert.verdict, Verdict::ExactByPairwisePSD);
    }

    #[test]
    fn ball_removal_threshold() {
        let cert = check_pairwise_sum(&ball_removal_blocks(1, 0.8), 1e-9).unwrap();
        assert_eq!(cert.verdict, Verdict::ExactByPairwisePSD);
        let cert = check_pairwise_sum(&ball_removal_blocks(1, 1.0), 1e-9).unwrap();
        assert_eq!(cert.verdict, Verdict::ConditionFails);
        // the failing pairs involve the ball block; Schur complement
        // 1 − γ − γ/4 = −1/4 < 0 at γ = 1
        let bad: Vec<_> = cert.pairs.iter().filter(|p| !p.holds).collect();
        assert!(bad.iter().any(|p| p.k == "ineq[0]" && p.l == "ineq[2]"));
    }

    #[test]
    fn tau_search_examples() {
        // B_k = −I: margin grows linearly in τ
        let ts = check_tau_linesearch(&diag(&[-1.0, -1.0]), &diag(&[1.0, -1.0]), 1e-9).unwrap();
        assert!(ts.found);
        assert!(ts.tau >= 1.0);
        assert!(ts.margin >= -1e-9);

        // closure-only case: −B_ℓ − τB_k has det −1 for every τ
        let bk = mat(&[&[-1.0, 0.0], &[0.0, 0.0]]);
        let bl = mat(&[&[1.0, 1.0], &[1.0, 0.0]]);
        let ts = check_tau_linesearch(&bk, &bl, 1e-9).unwrap();
        assert!(!ts.found, "margin {} at tau {}", ts.margin, ts.tau);

        // B_k = O, B_ℓ = −I: found at τ = 0 with margin 1
        let ts = check_tau_linesearch(&SymMatrix::zeros(2), &diag(&[-1.0, -1.0]), 1e-9).unwrap();
        assert!(ts.found);
        assert_eq!(ts.tau, 0.0);
        assert!((ts.margin - 1.0).abs() <= 1e-12);
        assert!(ts.redundant);
    }

    #[test]
    fn tau_redundancy_flag() {
        // B_ℓ ⪯ 0 is vacuous: τ = 0 certifies and flags redundancy
        let bk = mat(&[&[1.0, 1.0], &[1.0, 0.0]]);
        let bl = mat(&[&[-1.0, 0.0], &[0.0, 0.0]]);
        let ts = check_tau_linesearch(&bk, &bl, 1e-9).unwrap();
        assert!(ts.found);
        assert!(ts.redundant);
    }

    #[test]
    fn subset_direct_examples() {
        // closure-only pair: both directions hold
        let b1 = mat(&[&[1.0, 1.0], &[1.0, 0.0]]);
        let b2 = mat(&[&[-1.0, 0.0], &[0.0, 0.0]]);
        let st = check_subset_direct(&b2, &b1, 1e-7).unwrap();
        assert!(st.holds, "witness {:?}", st.witness);
        assert!(st.witness.unwrap() <= 1e-7);
        let st = check_subset_direct(&b1, &b2, 1e-7).unwrap();
        assert!(st.holds);

        // B_ℓ = −I: optimum is −trace = −1
        let st = check_subset_direct(&diag(&[1.0, -1.0]), &diag(&[-1.0, -1.0]), 1e-7).unwrap();
        assert!(st.holds);
        assert!((st.witness.unwrap() + 1.0).abs() <= 1e-6);

        // feasible point X = diag(1/2,1/2) gives ⟨B_ℓ,X⟩ = 1
        let st = check_subset_direct(&diag(&[1.0, -1.0]), &diag(&[1.0, 1.0]), 1e-7).unwrap();
        assert!(!st.holds);
        assert!((st.witness.unwrap() - 1.0).abs() <= 1e-5);
    }

    #[test]
    fn membership_examples() {
        let p = ConicQcqp::new(
            SymMatrix::identity(2),
            SymMatrix::identity(2),
            vec![],
            vec![diag(&[1.0, -1.0])],
        )
        .unwrap();
        // PSD fast path
        let m = check_dual_membership(&SymMatrix::identity(2), &p, 1e-7).unwrap();
        assert!(m.member);
        // −B_ℓ fast path
        let m = check_dual_membership(&diag(&[-1.0, 1.0]), &p, 1e-7).unwrap();
        assert!(m.member);
        // bare PSD cone: distance of diag(1,−1) is 1
        let bare =
            ConicQcqp::new(SymMatrix::identity(2), SymMatrix::identity(2), vec![], vec![])
                .unwrap();
        let m = check_dual_membership(&diag(&[1.0, -1.0]), &bare, 1e-7).unwrap();
        assert!(!m.member);
        assert!(m.residual >= 1.0 - 1e-9);
    }

    #[test]
    fn membership_with_generators() {
        let b1 = diag(&[-1.0, 0.0]);
        let p = ConicQcqp::new(
            SymMatrix::identity(2),
            SymMatrix::identity(2),
            vec![],
            vec![b1.clone()],
        )
        .unwrap();
        // diag(2,0) = −2·B₁, reachable with y = −2 ≤ 0
        let m = check_dual_membership(&diag(&[2.0, 0.0]), &p, 1e-6).unwrap();
        assert!(m.member, "residual {}", m.residual);
        // diag(−2,−1) would need y = +2 > 0
        let m = check_dual_membership(&diag(&[-2.0, -1.0]), &p, 1e-6).unwrap();
        assert!(!m.member);
        assert!(m.residual >= 0.5);
    }

    #[test]
    fn slater_examples() {
        let p =
            ConicQcqp::new(SymMatrix::identity(2), SymMatrix::identity(2), vec![], vec![])
                .unwrap();
        let s = check_dual_slater(&p, 1e-9).unwrap();
        assert!(s.holds);
        assert!(s.margin > 0.0);

        let p = ConicQcqp::new(diag(&[1.0, -1.0]), SymMatrix::identity(2), vec![], vec![])
            .unwrap();
        let s = check_dual_slater(&p, 1e-9).unwrap();
        // e.g. the shift t = −2 gives Q + 2I = diag(3,1) ≻ 0
        assert!(s.holds, "margin {}", s.margin);
        assert!(p.objective().sub(&p.normalizer().scale(s.t)).min_eig().unwrap() > 0.0);

        // H indefinite, Q a pure off-diagonal flip: no t separates
        let p = ConicQcqp::new(
            mat(&[&[0.0, 1.0], &[1.0, 0.0]]),
            diag(&[1.0, -1.0]),
            vec![],
            vec![],
        )
        .unwrap();
        let s = check_dual_slater(&p, 1e-9).unwrap();
        assert!(!s.holds);
    }

    #[test]
    fn certify_trivial_and_failing() {
        let single = ConicQcqp::new(
            SymMatrix::identity(2),
            SymMatrix::identity(2),
            vec![],
            vec![diag(&[1.0, -1.0])],
        )
        .unwrap();
        let cert = certify_exactness(&single, 1e-7).unwrap();
        assert_eq!(cert.verdict, Verdict::TriviallyExact);

        let failing = ConicQcqp::new(
            SymMatrix::identity(2),
            SymMatrix::identity(2),
            vec![],
            vec![diag(&[1.0, -1.0]), diag(&[-1.0, 1.0]), diag(&[1.0, 1.0])],
        )
        .unwrap();
        let cert = certify_exactness(&failing, 1e-7).unwrap();
        assert_eq!(cert.verdict, Verdict::ConditionFails);
    }

    #[test]
    fn certify_closure_pair_by_direct_test() {
        let p = ConicQcqp::new(
            SymMatrix::identity(2),
            SymMatrix::identity(2),
            vec![],
            vec![
                mat(&[&[1.0, 1.0], &[1.0, 0.0]]),
                mat(&[&[-1.0, 0.0], &[0.0, 0.0]]),
            ],
        )
        .unwrap();
        let cert = certify_exactness(&p, 1e-7).unwrap();
        assert_eq!(cert.verdict, Verdict::ExactByDirectSubsetTest);
    }

    #[test]
    fn certify_equality_block_routes() {
        // one equality + one inequality; the PSD equality block is set aside
        let p = ConicQcqp::new(
            SymMatrix::identity(2),
            SymMatrix::identity(2),
            vec![diag(&[1.0, 0.0])],
            vec![diag(&[-1.0, 0.5])],
        )
        .unwrap();
        let cert = certify_exactness(&p, 1e-7).unwrap();
        assert!(cert.is_certified(), "verdict {:?}", cert.verdict);
        assert!(cert.notes.iter().any(|n| n.contains("set aside")));
    }

    #[test]
    fn certify_ball_removal_boundary_gamma() {
        // at γ = 1 the pairwise test fails but every ordered pair still
        // admits a (boundary) τ
        let blocks = ball_removal_blocks(1, 1.0);
        let p = ConicQcqp::new(
            SymMatrix::from_diagonal(&[1.0, 0.0]),
            SymMatrix::from_diagonal(&[0.0, 1.0]),
            vec![],
            blocks,
        )
        .unwrap();
        let cert = certify_exactness(&p, 1e-9).unwrap();
        assert_eq!(cert.verdict, Verdict::ExactByTauLineSearch);
    }

    #[test]
    fn monotone_strength_on_random_certified() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..15 {
            let n = rng.gen_range(2..5usize);
            let m = rng.gen_range(2..4usize);
            // small off-diagonal noise plus a strong negative shift makes
            // every pairwise sum NSD
            let blocks: Vec<SymMatrix> = (0..m)
                .map(|_| {
                    let noise = SymMatrix::from_fn(n, |_, _| rng.gen_range(-0.2..0.2));
                    noise.add_scaled_identity(-1.0)
                })
                .collect();
            let cert = check_pairwise_sum(&blocks, 1e-9).unwrap();
            assert_eq!(cert.verdict, Verdict::ExactByPairwisePSD);
            for k in 0..m {
                for l in 0..m {
                    if k == l {
                        continue;
                    }
                    let ts = check_tau_linesearch(&blocks[k], &blocks[l], 1e-9).unwrap();
                    assert!(ts.found, "tau should succeed whenever pairwise does");
                    let st = check_subset_direct(&blocks[k], &blocks[l], 1e-6).unwrap();
                    assert!(st.holds, "subset should hold whenever tau does");
                }
            }
        }
    }

    #[test]
    fn subset_self_inclusion() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = rng.gen_range(2..5usize);
            let b = SymMatrix::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            let st = check_subset_direct(&b, &b, 1e-6).unwrap();
            assert!(st.holds);
        }
    }
}
