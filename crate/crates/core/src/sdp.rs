//! Dense primal-dual interior-point solver for the SDP relaxation
//!
//! ```text
//!     minimize    ⟨Q,X⟩
//!     subject to  ⟨H,X⟩ = 1
//!                 ⟨B_j,X⟩ = 0   (equality blocks and the face Gram AᵀA)
//!                 ⟨B_k,X⟩ ≤ 0   (inequality blocks, scalar slacks s_k ≥ 0)
//!                 X ⪰ 0.
//! ```
//!
//! The dual is max t with Y = Q − tH − Σ y_j B_j − Σ y_k B_k ⪰ 0 and
//! y_k ≤ 0 on inequality rows.
//!
//! Two layers:
//!
//! 1. **Facial reduction.** Equality blocks that are themselves semidefinite
//!    (the face Gram always is) pin X to the kernel face of the PSD cone, so
//!    the feasible set has no interior and plain interior-point iterates
//!    degrade. Those blocks are projected out up front: X = N X' Nᵀ with N an
//!    orthonormal kernel basis. Semidefinite inequality blocks are either
//!    vacuous (⪯ 0, dropped) or forced active (⪰ 0, folded into the face).
//!    An empty kernel, or a normalizer that vanishes under projection, is a
//!    structural proof of primal infeasibility. Multipliers for the
//!    eliminated blocks are reconstructed afterwards so the returned dual
//!    slack is PSD in the full space.
//!
//! 2. **An HKM-direction Mehrotra predictor-corrector IPM** on the reduced
//!    problem, infeasible start, dense Schur complement (one row per linear
//!    constraint), fraction-to-boundary 0.98.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::model::ConicQcqp;
use crate::sym::SymMatrix;

/// Solver options. `feas_tol` is absolute on the primal residual (the
/// right-hand side is (1, 0, …, 0)); the duality gap is relative.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: 1e-8,
            gap_tol: 1e-7,
            max_iter: 200,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIter,
    NumericalTrouble,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::PrimalInfeasible => "PrimalInfeasible",
            SolveStatus::DualInfeasible => "DualInfeasible",
            SolveStatus::MaxIter => "MaxIter",
            SolveStatus::NumericalTrouble => "NumericalTrouble",
        };
        f.write_str(s)
    }
}

/// One line of the iteration log.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IterLog {
    pub iter: usize,
    /// ‖r_p‖_∞
    pub primal_res: f64,
    /// ‖r_p‖_2 (for residual-corrected weak-duality checks)
    pub primal_res2: f64,
    /// ‖R_d‖_F
    pub dual_res: f64,
    pub gap: f64,
    pub alpha_p: f64,
    pub alpha_d: f64,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub x_norm: f64,
    pub lambda_norm: f64,
}

/// Heuristic dual improving-ray snapshot reported with `PrimalInfeasible`.
#[derive(Debug, Clone)]
pub struct DualRay {
    pub t: f64,
    pub y_eq: Vec<f64>,
    pub y_ineq: Vec<f64>,
}

/// Result of a solve. For `status == Optimal` the iterate satisfies the
/// declared tolerances; for other statuses the fields hold the last iterate.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub x: SymMatrix,
    /// Multiplier of ⟨H,X⟩ = 1 (the dual objective).
    pub t: f64,
    /// Multipliers of the equality blocks; if a face is attached its
    /// multiplier is appended as the last entry.
    pub y_eq: Vec<f64>,
    /// Multipliers of the inequality blocks (nonpositive at optimality).
    pub y_ineq: Vec<f64>,
    /// Dual slack Y = Q − tH − Σ y·B.
    pub dual_slack: SymMatrix,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub gap: f64,
    pub iterations: usize,
    pub trace: Vec<IterLog>,
    pub dual_ray: Option<DualRay>,
    /// Free-form note on how the status was reached (e.g. which structural
    /// argument proved infeasibility).
    pub note: String,
}

// --- facial reduction -----------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Eq(usize),
    Ineq(usize),
    Face,
}

struct Stage {
    /// Σ σ·B (projected into the space this stage operates on); PSD with
    /// kernel equal to the range of `basis`.
    c_proj: DMatrix<f64>,
    /// Orthonormal kernel basis (prev_dim × new_dim).
    basis: DMatrix<f64>,
    /// Eliminated blocks and the sign that made them PSD.
    elim: Vec<(Slot, f64)>,
}

struct Reduction {
    /// Cumulative basis, n × d.
    basis: DMatrix<f64>,
    stages: Vec<Stage>,
    kept_eq: Vec<usize>,
    kept_ineq: Vec<usize>,
    q: SymMatrix,
    h: SymMatrix,
    eqs: Vec<SymMatrix>,
    ineqs: Vec<SymMatrix>,
}

enum ReduceOutcome {
    Infeasible(&'static str),
    Reduced(Reduction),
    EigenFailure,
}

fn classify(b: &SymMatrix) -> Option<(f64, f64)> {
    let dec = b.eigendecompose().ok()?;
    let n = dec.eigenvalues.len();
    Some((dec.eigenvalues[0], dec.eigenvalues[n - 1]))
}

fn reduce(p: &ConicQcqp) -> ReduceOutcome {
    let orig_scale = 1.0 + p.normalizer().frob_norm();
    let mut basis = DMatrix::<f64>::identity(p.n(), p.n());
    let mut q = p.objective().clone();
    let mut h = p.normalizer().clone();
    let mut eqs: Vec<(Slot, SymMatrix)> = p
        .eq_blocks()
        .iter()
        .enumerate()
        .map(|(i, b)| (Slot::Eq(i), b.clone()))
        .collect();
    if let Some(g) = p.face_gram() {
        eqs.push((Slot::Face, g));
    }
    let mut ineqs: Vec<(Slot, SymMatrix)> = p
        .ineq_blocks()
        .iter()
        .enumerate()
        .map(|(i, b)| (Slot::Ineq(i), b.clone()))
        .collect();
    let mut stages = Vec::new();

    loop {
        let dim = q.n();
        let mut elim: Vec<(Slot, f64)> = Vec::new();
        let mut kept_eqs = Vec::new();
        for (slot, b) in eqs.drain(..) {
            let norm = b.frob_norm();
            if norm <= 1e-14 * orig_scale {
                continue; // vacuous ⟨O,X⟩ = 0, multiplier stays 0
            }
            let eps = 1e-10 * (1.0 + norm);
            let (lo, hi) = match classify(&b) {
                Some(v) => v,
                None => return ReduceOutcome::EigenFailure,
            };
            if lo >= -eps {
                elim.push((slot, 1.0));
            } else if hi <= eps {
                elim.push((slot, -1.0));
            } else {
                kept_eqs.push((slot, b));
            }
        }
        let mut kept_ineqs = Vec::new();
        for (slot, b) in ineqs.drain(..) {
            let norm = b.frob_norm();
            if norm <= 1e-14 * orig_scale {
                continue;
            }
            let eps = 1e-10 * (1.0 + norm);
            let (lo, hi) = match classify(&b) {
                Some(v) => v,
                None => return ReduceOutcome::EigenFailure,
            };
            if hi <= eps {
                // ⟨B,X⟩ ≤ 0 holds for every PSD X; dropped, multiplier 0
            } else if lo >= -eps {
                elim.push((slot, 1.0)); // forced active: fold into the face
            } else {
                kept_ineqs.push((slot, b));
            }
        }
        eqs = kept_eqs;
        ineqs = kept_ineqs;
        if elim.is_empty() {
            break;
        }
        // kernel of the PSD sum Σ σ·B is the intersection of the kernels
        let mut c = DMatrix::zeros(dim, dim);
        for (slot, sigma) in &elim {
            let b = block_matrix(p, *slot, &basis);
            c += b.as_matrix() * *sigma;
        }
        let c_sym = SymMatrix::symmetrized(c);
        let dec = match c_sym.eigendecompose() {
            Ok(d) => d,
            Err(_) => return ReduceOutcome::EigenFailure,
        };
        let tol = 1e-9 * (1.0 + c_sym.frob_norm());
        let kernel = dec.kernel_basis(tol);
        if kernel.ncols() == 0 {
            return ReduceOutcome::Infeasible("equality structure forces X = 0");
        }
        q = q.congruence(&kernel);
        h = h.congruence(&kernel);
        for (_, b) in eqs.iter_mut() {
            *b = b.congruence(&kernel);
        }
        for (_, b) in ineqs.iter_mut() {
            *b = b.congruence(&kernel);
        }
        basis = &basis * &kernel;
        stages.push(Stage {
            c_proj: c_sym.as_matrix().clone(),
            basis: kernel,
            elim,
        });
    }

    if h.frob_norm() <= 1e-12 * orig_scale {
        return ReduceOutcome::Infeasible("normalizer vanishes on the feasible face");
    }

    ReduceOutcome::Reduced(Reduction {
        basis,
        stages,
        kept_eq: eqs
            .iter()
            .map(|(s, _)| match s {
                Slot::Eq(i) => *i,
                _ => unreachable!("face Gram is PSD and always eliminated"),
            })
            .collect(),
        kept_ineq: ineqs
            .iter()
            .map(|(s, _)| match s {
                Slot::Ineq(i) => *i,
                _ => unreachable!(),
            })
            .collect(),
        q,
        h,
        eqs: eqs.into_iter().map(|(_, b)| b).collect(),
        ineqs: ineqs.into_iter().map(|(_, b)| b).collect(),
    })
}

/// Original block for `slot`, projected by `basis`.
fn block_matrix(p: &ConicQcqp, slot: Slot, basis: &DMatrix<f64>) -> SymMatrix {
    let full = match slot {
        Slot::Eq(i) => p.eq_blocks()[i].clone(),
        Slot::Ineq(i) => p.ineq_blocks()[i].clone(),
        Slot::Face => p.face_gram().expect("face slot requires face rows"),
    };
    if basis.ncols() == basis.nrows() {
        full
    } else {
        full.congruence(basis)
    }
}

// --- inner IPM --------------------------------------------------------------

struct Inner {
    status: SolveStatus,
    x: DMatrix<f64>,
    lam: DVector<f64>,
    y_slack: DMatrix<f64>,
    primal_obj: f64,
    dual_obj: f64,
    gap: f64,
    iterations: usize,
    trace: Vec<IterLog>,
}

/// Largest α ≥ 0 with P + α·D ⪰ 0, for P ≻ 0 (capped at `BIG`).
fn max_step_psd(p: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    const BIG: f64 = 1e16;
    let n = p.nrows();
    if n == 0 {
        return BIG;
    }
    let w = match Cholesky::new(p.clone()) {
        Some(ch) => {
            let l = ch.l();
            let t = l.solve_lower_triangular(d).expect("nonsingular L");
            let z = l
                .solve_lower_triangular(&t.transpose())
                .expect("nonsingular L");
            z.transpose()
        }
        None => {
            // fall back to an eigenvalue-clamped inverse square root
            let dec = match SymMatrix::symmetrized(p.clone()).eigendecompose() {
                Ok(d) => d,
                Err(_) => return 0.0,
            };
            let lmax = dec.eigenvalues[n - 1].max(1e-300);
            let inv_sqrt = DMatrix::from_fn(n, n, |i, j| {
                dec.eigenvectors[(i, j)] / dec.eigenvalues[j].max(1e-14 * lmax).sqrt()
            });
            inv_sqrt.transpose() * d * inv_sqrt
        }
    };
    let w = SymMatrix::symmetrized(w);
    match w.min_eig() {
        Ok(m) if m < -1e-14 => 1.0 / (-m),
        Ok(_) => BIG,
        Err(_) => 0.0,
    }
}

fn max_step_vec(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut a = 1e16f64;
    for i in 0..v.len() {
        if dv[i] < 0.0 {
            a = a.min(v[i] / (-dv[i]));
        }
    }
    a
}

#[allow(clippy::too_many_arguments)]
fn ipm(
    n: usize,
    q: &SymMatrix,
    mats: &[SymMatrix], // row 0 = normalizer, then equalities, then inequalities
    n_eq: usize,
    n_in: usize,
    opts: &SolverOptions,
    scale: f64,
) -> Inner {
    let rows = 1 + n_eq + n_in;
    let in_off = 1 + n_eq;
    let qn = q.frob_norm();
    let rho = 1.0 + qn + mats[0].frob_norm();

    let mut x = DMatrix::<f64>::identity(n, n) * rho;
    let mut s = DVector::from_element(n_in, rho);
    let mut y = DMatrix::<f64>::identity(n, n) * rho; // dual slack
    let mut lam = DVector::<f64>::zeros(rows);
    for k in 0..n_in {
        lam[in_off + k] = -rho;
    }

    let mut b = DVector::<f64>::zeros(rows);
    b[0] = 1.0;

    let mut trace: Vec<IterLog> = Vec::new();
    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;
    let mut stall = 0usize;

    let amap = |xm: &DMatrix<f64>| -> DVector<f64> {
        DVector::from_fn(rows, |i, _| mats[i].as_matrix().dot(xm))
    };
    let aadj = |l: &DVector<f64>| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n, n);
        for i in 0..rows {
            out += mats[i].as_matrix() * l[i];
        }
        out
    };

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let w = DVector::from_fn(n_in, |k, _| -lam[in_off + k]);

        // residuals
        let mut r_p = &b - amap(&x);
        for k in 0..n_in {
            r_p[in_off + k] -= s[k];
        }
        let r_d = q.as_matrix() - aadj(&lam) - &y;

        let zeta_p = q.as_matrix().dot(&x);
        let zeta_d = lam[0];
        let gap = (zeta_p - zeta_d).abs();
        let gap_rel = gap / (1.0 + zeta_p.abs());
        let mu = (x.dot(&y) + s.dot(&w)) / (n + n_in) as f64;

        let rp_inf = r_p.amax();
        let rp_2 = r_p.norm();
        let rd_f = r_d.norm();

        if !mu.is_finite() || !zeta_p.is_finite() {
            status = SolveStatus::NumericalTrouble;
            break;
        }

        if rp_inf <= opts.feas_tol && rd_f <= opts.feas_tol * (1.0 + qn) && gap_rel <= opts.gap_tol
        {
            trace.push(IterLog {
                iter,
                primal_res: rp_inf,
                primal_res2: rp_2,
                dual_res: rd_f,
                gap,
                alpha_p: 0.0,
                alpha_d: 0.0,
                primal_obj: zeta_p,
                dual_obj: zeta_d,
                x_norm: x.norm(),
                lambda_norm: lam.norm(),
            });
            status = SolveStatus::Optimal;
            break;
        }

        // desk-quality divergence heuristics
        let cap = 1e10 * scale;
        if zeta_d > cap && rp_inf > 1e2 * opts.feas_tol {
            status = SolveStatus::PrimalInfeasible;
            break;
        }
        if zeta_p < -cap {
            status = SolveStatus::DualInfeasible;
            break;
        }

        // factor Y and assemble the Schur complement
        let y_chol = match Cholesky::new(y.clone()) {
            Some(c) => c,
            None => {
                status = SolveStatus::NumericalTrouble;
                break;
            }
        };
        let y_inv = y_chol.inverse();

        // t_mats[j] = sym(X A_j Y⁻¹)
        let t_mats: Vec<DMatrix<f64>> = (0..rows)
            .map(|j| {
                let t = &x * mats[j].as_matrix() * &y_inv;
                (&t + t.transpose()) * 0.5
            })
            .collect();
        let mut m = DMatrix::<f64>::zeros(rows, rows);
        for i in 0..rows {
            for j in 0..rows {
                m[(i, j)] = mats[i].as_matrix().dot(&t_mats[j]);
            }
        }
        m = (&m + m.transpose()) * 0.5;
        for k in 0..n_in {
            m[(in_off + k, in_off + k)] += s[k] / w[k];
        }

        let mut chol = Cholesky::new(m.clone());
        let mut reg = 1e-14 * (1.0 + m.trace() / rows as f64);
        while chol.is_none() && reg < 1e-4 {
            let mut mr = m.clone();
            for i in 0..rows {
                mr[(i, i)] += reg;
            }
            chol = Cholesky::new(mr);
            reg *= 100.0;
        }
        let chol = match chol {
            Some(c) => c,
            None => {
                status = SolveStatus::NumericalTrouble;
                break;
            }
        };

        // one Newton solve for a given centering σ and second-order term
        let xy = &x * &y;
        let solve_dir = |sigma_mu: f64,
                         corr_xy: &DMatrix<f64>,
                         corr_s: &DVector<f64>|
         -> (DMatrix<f64>, DVector<f64>, DVector<f64>, DMatrix<f64>) {
            let mut target = -&xy - corr_xy;
            for i in 0..n {
                target[(i, i)] += sigma_mu;
            }
            let g = &target * &y_inv - &x * &r_d * &y_inv;
            let g_sym = (&g + g.transpose()) * 0.5;
            let mut rhs = &r_p - amap(&g_sym);
            for k in 0..n_in {
                let comp = (sigma_mu - s[k] * w[k] - corr_s[k]) / w[k];
                rhs[in_off + k] -= comp;
            }
            let dlam = chol.solve(&rhs);
            let dy = &r_d - aadj(&dlam);
            let dx_raw = &g + &x * aadj(&dlam) * &y_inv;
            let dx = (&dx_raw + dx_raw.transpose()) * 0.5;
            let ds = DVector::from_fn(n_in, |k, _| {
                (sigma_mu - s[k] * w[k] - corr_s[k]) / w[k] + (s[k] / w[k]) * dlam[in_off + k]
            });
            (dx, ds, dlam, dy)
        };

        // predictor
        let zero_xy = DMatrix::zeros(n, n);
        let zero_s = DVector::zeros(n_in);
        let (dx_a, ds_a, dlam_a, dy_a) = solve_dir(0.0, &zero_xy, &zero_s);
        let dw_a = DVector::from_fn(n_in, |k, _| -dlam_a[in_off + k]);
        let ap_a = max_step_psd(&x, &dx_a).min(max_step_vec(&s, &ds_a)).min(1.0);
        let ad_a = max_step_psd(&y, &dy_a).min(max_step_vec(&w, &dw_a)).min(1.0);
        let mu_aff = ((&x + &dx_a * ap_a).dot(&(&y + &dy_a * ad_a))
            + (&s + &ds_a * ap_a).dot(&(&w + &dw_a * ad_a)))
        .max(0.0)
            / (n + n_in) as f64;
        let sigma = if mu > 0.0 {
            (mu_aff / mu).powi(3).clamp(1e-8, 1.0)
        } else {
            1e-8
        };

        // corrector
        let corr_xy = &dx_a * &dy_a;
        let corr_s = DVector::from_fn(n_in, |k, _| ds_a[k] * dw_a[k]);
        let (dx, ds, dlam, dy) = solve_dir(sigma * mu, &corr_xy, &corr_s);
        let dw = DVector::from_fn(n_in, |k, _| -dlam[in_off + k]);

        let tau = 0.98;
        let alpha_p = (tau * max_step_psd(&x, &dx).min(max_step_vec(&s, &ds))).min(1.0);
        let alpha_d = (tau * max_step_psd(&y, &dy).min(max_step_vec(&w, &dw))).min(1.0);

        trace.push(IterLog {
            iter,
            primal_res: rp_inf,
            primal_res2: rp_2,
            dual_res: rd_f,
            gap,
            alpha_p,
            alpha_d,
            primal_obj: zeta_p,
            dual_obj: zeta_d,
            x_norm: x.norm(),
            lambda_norm: lam.norm(),
        });
        if opts.verbose {
            eprintln!(
                "iter {iter:3} rp {rp_inf:9.2e} rd {rd_f:9.2e} gap {gap:9.2e} ap {alpha_p:5.3} ad {alpha_d:5.3}"
            );
        }

        if alpha_p < 1e-10 && alpha_d < 1e-10 {
            stall += 1;
            if stall >= 3 {
                status = SolveStatus::NumericalTrouble;
                break;
            }
        } else {
            stall = 0;
        }

        x = (&x + &dx * alpha_p).clone();
        x = (&x + x.transpose()) * 0.5;
        s += &ds * alpha_p;
        lam += &dlam * alpha_d;
        y = (&y + &dy * alpha_d).clone();
        y = (&y + y.transpose()) * 0.5;
    }

    let zeta_p = q.as_matrix().dot(&x);
    let zeta_d = lam[0];
    Inner {
        status,
        x,
        lam,
        y_slack: y,
        primal_obj: zeta_p,
        dual_obj: zeta_d,
        gap: (zeta_p - zeta_d).abs(),
        iterations,
        trace,
    }
}

// --- dual completion across reduction stages -------------------------------

/// Smallest eigenvalue of `c` restricted to the complement of its kernel.
fn min_positive_eig(c: &SymMatrix) -> f64 {
    let tol = 1e-9 * (1.0 + c.frob_norm());
    match c.eigendecompose() {
        Ok(d) => d
            .eigenvalues
            .iter()
            .copied()
            .filter(|&l| l > tol)
            .fold(f64::INFINITY, f64::min),
        Err(_) => f64::INFINITY,
    }
}

/// Walks the reduction stages from the innermost outwards, assigning
/// multipliers c·σ to the eliminated blocks so that the full-space dual
/// slack Q − tH − Σ y·B stays PSD. Adding c·(Σ σB) is exact on the kernel
/// face and dominates the complement for large c; c is escalated until the
/// eigenvalue check passes.
fn complete_duals(
    p: &ConicQcqp,
    red: &Reduction,
    t: f64,
    y_eq: &mut [f64],
    y_ineq: &mut [f64],
    y_face: &mut f64,
) -> SymMatrix {
    let n = p.n();
    let assemble = |y_eq: &[f64], y_ineq: &[f64], y_face: f64| -> DMatrix<f64> {
        let mut m = p.objective().as_matrix() - p.normalizer().as_matrix() * t;
        for (j, b) in p.eq_blocks().iter().enumerate() {
            m -= b.as_matrix() * y_eq[j];
        }
        for (k, b) in p.ineq_blocks().iter().enumerate() {
            m -= b.as_matrix() * y_ineq[k];
        }
        if let Some(g) = p.face_gram() {
            m -= g.as_matrix() * y_face;
        }
        m
    };

    // cumulative bases outside each stage: bases[k] maps stage-k space → ℝⁿ
    let mut bases: Vec<DMatrix<f64>> = vec![DMatrix::identity(n, n)];
    for st in &red.stages {
        let last = bases.last().unwrap();
        bases.push(last * &st.basis);
    }

    for (k, st) in red.stages.iter().enumerate().rev() {
        let outer = &bases[k];
        let base_full = assemble(y_eq, y_ineq, *y_face);
        let base = SymMatrix::symmetrized(outer.transpose() * &base_full * outer);
        let c_mat = SymMatrix::symmetrized(st.c_proj.clone());
        let lperp = min_positive_eig(&c_mat).max(1e-12);
        let mut c = (1.0 + base.frob_norm()) / lperp;
        for _ in 0..8 {
            let cand = base.add(&c_mat.scale(c));
            let ok = cand
                .min_eig()
                .map(|l| l >= -5e-9 * (1.0 + cand.frob_norm()))
                .unwrap_or(false);
            if ok {
                break;
            }
            c *= 100.0;
        }
        for (slot, sigma) in &st.elim {
            let y = -sigma * c;
            match slot {
                Slot::Eq(j) => y_eq[*j] = y,
                Slot::Ineq(i) => y_ineq[*i] = y, // σ = +1 here, so y = −c ≤ 0
                Slot::Face => *y_face = y,
            }
        }
    }

    SymMatrix::symmetrized(assemble(y_eq, y_ineq, *y_face))
}

// --- public entry points -----------------------------------------------------

/// Solves the SDP relaxation of `p`.
pub fn solve(p: &ConicQcqp, opts: &SolverOptions) -> SdpSolution {
    let n = p.n();
    let scale = 1.0 + p.objective().frob_norm() + p.normalizer().frob_norm();
    let n_eq_out = p.eq_blocks().len() + usize::from(p.face_rows().is_some());

    let infeasible = |context: &'static str| SdpSolution {
        status: SolveStatus::PrimalInfeasible,
        x: SymMatrix::zeros(n),
        t: 0.0,
        y_eq: vec![0.0; n_eq_out],
        y_ineq: vec![0.0; p.ineq_blocks().len()],
        dual_slack: SymMatrix::zeros(n),
        primal_obj: f64::INFINITY,
        dual_obj: f64::INFINITY,
        gap: 0.0,
        iterations: 0,
        trace: Vec::new(),
        dual_ray: Some(DualRay {
            t: 1.0,
            y_eq: vec![0.0; n_eq_out],
            y_ineq: vec![0.0; p.ineq_blocks().len()],
        }),
        note: context.to_string(),
    };

    let red = match reduce(p) {
        ReduceOutcome::Infeasible(why) => return infeasible(why),
        ReduceOutcome::EigenFailure => {
            let mut sol = infeasible("");
            sol.status = SolveStatus::NumericalTrouble;
            sol.dual_ray = None;
            return sol;
        }
        ReduceOutcome::Reduced(r) => r,
    };

    let d = red.q.n();
    let mut mats = Vec::with_capacity(1 + red.eqs.len() + red.ineqs.len());
    mats.push(red.h.clone());
    mats.extend(red.eqs.iter().cloned());
    mats.extend(red.ineqs.iter().cloned());
    let inner = ipm(
        d,
        &red.q,
        &mats,
        red.eqs.len(),
        red.ineqs.len(),
        opts,
        scale,
    );

    // lift the primal back to ℝⁿ
    let x_full = SymMatrix::symmetrized(&red.basis * &inner.x * red.basis.transpose());

    // scatter kept multipliers, then complete the eliminated ones
    let mut y_eq = vec![0.0; p.eq_blocks().len()];
    let mut y_ineq = vec![0.0; p.ineq_blocks().len()];
    let mut y_face = 0.0;
    let t = inner.lam[0];
    for (pos, &j) in red.kept_eq.iter().enumerate() {
        y_eq[j] = inner.lam[1 + pos];
    }
    let in_off = 1 + red.kept_eq.len();
    for (pos, &k) in red.kept_ineq.iter().enumerate() {
        y_ineq[k] = inner.lam[in_off + pos];
    }

    let dual_slack = if inner.status == SolveStatus::Optimal {
        complete_duals(p, &red, t, &mut y_eq, &mut y_ineq, &mut y_face)
    } else {
        SymMatrix::symmetrized(&red.basis * &inner.y_slack * red.basis.transpose())
    };

    let dual_ray = if inner.status == SolveStatus::PrimalInfeasible {
        let norm = inner.lam.norm().max(1e-300);
        Some(DualRay {
            t: t / norm,
            y_eq: y_eq.iter().map(|v| v / norm).collect(),
            y_ineq: y_ineq.iter().map(|v| v / norm).collect(),
        })
    } else {
        None
    };

    if p.face_rows().is_some() {
        y_eq.push(y_face);
    }

    SdpSolution {
        status: inner.status,
        x: x_full,
        t,
        y_eq,
        y_ineq,
        dual_slack,
        primal_obj: inner.primal_obj,
        dual_obj: inner.dual_obj,
        gap: inner.gap,
        iterations: inner.iterations,
        trace: inner.trace,
        dual_ray,
        note: String::new(),
    }
}

/// Solves `maximize ⟨c,X⟩ s.t. ⟨normalizer,X⟩ = 1, ⟨B_j,X⟩ = 0,
/// ⟨B_k,X⟩ ≤ 0, X ⪰ 0`. Backend for the subset and membership tests, used
/// with trace normalization. `primal_obj`/`dual_obj` are reported in the
/// maximization convention; multipliers stay in the internal minimization
/// convention.
pub fn solve_feasibility(
    c: &SymMatrix,
    eq_blocks: &[SymMatrix],
    ineq_blocks: &[SymMatrix],
    normalizer: &SymMatrix,
    opts: &SolverOptions,
) -> crate::Result<SdpSolution> {
    let p = ConicQcqp::new(
        c.neg(),
        normalizer.clone(),
        eq_blocks.to_vec(),
        ineq_blocks.to_vec(),
    )?;
    let mut sol = solve(&p, opts);
    let (po, d_o) = (sol.primal_obj, sol.dual_obj);
    sol.primal_obj = -po;
    sol.dual_obj = -d_o;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConicQcqp;
    use approx::assert_abs_diff_eq;

    fn diag(d: &[f64]) -> SymMatrix {
        SymMatrix::from_diagonal(d)
    }

    fn solve_simple(
        q: SymMatrix,
        h: SymMatrix,
        eq: Vec<SymMatrix>,
        ineq: Vec<SymMatrix>,
    ) -> SdpSolution {
        let p = ConicQcqp::new(q, h, eq, ineq).unwrap();
        solve(&p, &SolverOptions::default())
    }

    #[test]
    fn single_point_problem() {
        let sol = solve_simple(diag(&[3.0]), diag(&[1.0]), vec![], vec![]);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.primal_obj, 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.x.get(0, 0), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn equality_block_pins_coordinate() {
        // X₁₁ = 0 and trace 1 force X = e₂e₂ᵀ
        let sol = solve_simple(
            diag(&[3.0, 5.0]),
            SymMatrix::identity(2),
            vec![diag(&[1.0, 0.0])],
            vec![],
        );
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.primal_obj, 5.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.x.get(1, 1), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.x.get(0, 0), 0.0, epsilon = 1e-8);
        // dual slack must be PSD in the full space after completion
        assert!(sol.dual_slack.min_eig().unwrap() >= -1e-8);
    }

    #[test]
    fn unconstrained_slice_attains_min_eigenvalue() {
        let sol = solve_simple(diag(&[1.0, -1.0]), SymMatrix::identity(2), vec![], vec![]);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.primal_obj, -1.0, epsilon = 1e-6);
    }

    #[test]
    fn trace_zero_face_is_infeasible() {
        let sol = solve_simple(
            diag(&[1.0, 1.0]),
            SymMatrix::identity(2),
            vec![SymMatrix::identity(2)],
            vec![],
        );
        assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
    }

    #[test]
    fn feasibility_backend_examples() {
        let opts = SolverOptions::default();
        // maximize ⟨I,X⟩ = trace X = 1 on the slice
        let sol = solve_feasibility(
            &SymMatrix::identity(2),
            &[diag(&[1.0, -1.0])],
            &[],
            &SymMatrix::identity(2),
            &opts,
        )
        .unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.primal_obj, 1.0, epsilon = 1e-6);

        // zero objective
        let sol = solve_feasibility(
            &SymMatrix::zeros(2),
            &[],
            &[],
            &SymMatrix::identity(2),
            &opts,
        )
        .unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.primal_obj, 0.0, epsilon = 1e-6);

        // boundary geometry: optimum 0 at X = diag(0, 1)
        let bl = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]], 1e-12).unwrap();
        let sol = solve_feasibility(
            &bl,
            &[diag(&[-1.0, 0.0])],
            &[],
            &SymMatrix::identity(2),
            &opts,
        )
        .unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.primal_obj, 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.x.get(1, 1), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn inequality_blocks_respected() {
        // minimize x₂₂-heavy objective but forbid mass on coordinate 2:
        // ⟨diag(0,1),X⟩ ≤ 0 forces X₂₂ = 0
        let sol = solve_simple(
            diag(&[3.0, -5.0]),
            SymMatrix::identity(2),
            vec![],
            vec![diag(&[0.0, 1.0])],
        );
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.primal_obj, 3.0, epsilon = 1e-6);
        assert!(sol.y_ineq[0] <= 1e-10);
    }

    #[test]
    fn scaling_invariance_of_argmin() {
        let q = diag(&[3.0, 5.0]);
        let p1 = ConicQcqp::new(
            q.clone(),
            SymMatrix::identity(2),
            vec![diag(&[1.0, 0.0])],
            vec![],
        )
        .unwrap();
        let p2 = ConicQcqp::new(
            q.scale(7.0),
            SymMatrix::identity(2),
            vec![diag(&[1.0, 0.0])],
            vec![],
        )
        .unwrap();
        let s1 = solve(&p1, &SolverOptions::default());
        let s2 = solve(&p2, &SolverOptions::default());
        assert_abs_diff_eq!(s2.primal_obj, 7.0 * s1.primal_obj, epsilon = 1e-5);
        let diff = s1.x.sub(&s2.x).frob_norm();
        assert!(diff <= 1e-6, "argmin moved by {diff}");
    }

    #[test]
    fn weak_duality_with_residual_correction() {
        // ζ_d − ζ_p ≤ ‖R_d‖·‖X‖ + ‖r_p‖·‖λ‖ holds at every iterate since
        // X, Y, s, w stay in the interior.
        let sol = solve_simple(
            diag(&[-2.0, 1.0, 0.5]),
            SymMatrix::identity(3),
            vec![],
            vec![SymMatrix::from_rows(
                &[
                    vec![0.3, 0.1, 0.0],
                    vec![0.1, -1.0, 0.0],
                    vec![0.0, 0.0, -0.5],
                ],
                1e-12,
            )
            .unwrap()],
        );
        assert_eq!(sol.status, SolveStatus::Optimal);
        for log in &sol.trace {
            let slack = log.dual_res * log.x_norm + log.primal_res2 * log.lambda_norm;
            assert!(
                log.dual_obj - log.primal_obj <= slack + 1e-9 * (1.0 + log.primal_obj.abs()),
                "iterate {} violates corrected weak duality",
                log.iter
            );
        }
    }
}
