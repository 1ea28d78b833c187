//! Brute-force baseline: sample the slice xᵀHx = 1, keep feasible points,
//! locally refine the best candidates. Values are upper bounds on the true
//! QCQP optimum — the oracle never claims global optimality, it provides an
//! independent desk-scale cross-check for the certified pipeline.
//!
//! Equality structure is handled in two ways: semidefinite equality blocks
//! and the face rows pin x to a kernel subspace, so sampling happens inside
//! that subspace exactly; indefinite equality blocks (measure-zero sets that
//! rejection sampling would never hit) are driven to feasibility by a
//! staged quadratic penalty followed by Gauss-Newton restoration.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::ConicQcqp;
use crate::sym::SymMatrix;

/// Feasibility bound for reported points.
const FEAS_TOL: f64 = 1e-8;
/// Number of candidates kept for local refinement.
const REFINE_POOL: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    /// Best feasible value found, `None` when no feasible point was found.
    pub best_value: Option<f64>,
    pub best_x: Option<Vec<f64>>,
    pub samples_evaluated: usize,
    pub refined: bool,
}

// --- low-discrepancy directions ----------------------------------------------

/// Kronecker sequence based on the d-harmonious number (the real root of
/// x^{d+1} = x + 1), mapped to Gaussians two coordinates at a time.
struct LowDiscrepancy {
    alphas: Vec<f64>,
}

impl LowDiscrepancy {
    fn new(dim: usize) -> Self {
        let m = dim + (dim & 1); // Box-Muller consumes pairs
        let mut g = 1.0f64;
        for _ in 0..60 {
            g = (1.0 + g).powf(1.0 / (m as f64 + 1.0));
        }
        let mut alphas = Vec::with_capacity(m);
        let mut a = 1.0;
        for _ in 0..m {
            a /= g;
            alphas.push(a.fract());
        }
        LowDiscrepancy { alphas }
    }

    fn gaussian(&self, k: usize, dim: usize) -> DVector<f64> {
        let m = self.alphas.len();
        let mut u = vec![0.0f64; m];
        for j in 0..m {
            u[j] = (0.5 + (k as f64 + 1.0) * self.alphas[j]).fract();
        }
        let mut z = vec![0.0f64; m];
        for j in 0..m / 2 {
            let u1 = u[2 * j].max(1e-12);
            let u2 = u[2 * j + 1];
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
            z[2 * j] = r * c;
            z[2 * j + 1] = r * s;
        }
        DVector::from_fn(dim, |i, _| z[i])
    }
}

// --- reduced problem -----------------------------------------------------------

/// Problem data projected onto the kernel of the semidefinite equality
/// structure (face rows plus PSD/NSD equality blocks).
struct Reduced {
    basis: DMatrix<f64>,
    q: SymMatrix,
    h: SymMatrix,
    /// Indefinite equality blocks, enforced by penalty + restoration.
    eqs: Vec<SymMatrix>,
    ineqs: Vec<SymMatrix>,
}

fn project_problem(p: &ConicQcqp) -> Option<Reduced> {
    let n = p.n();
    let mut c = DMatrix::<f64>::zeros(n, n);
    let mut pinned = false;
    let mut eqs = Vec::new();
    for b in p.eq_blocks() {
        let eps = 1e-10 * (1.0 + b.frob_norm());
        let dec = b.eigendecompose().ok()?;
        let (lo, hi) = (dec.eigenvalues[0], dec.eigenvalues[n - 1]);
        if lo >= -eps {
            c += b.as_matrix();
            pinned = true;
        } else if hi <= eps {
            c -= b.as_matrix();
            pinned = true;
        } else {
            eqs.push(b.clone());
        }
    }
    if let Some(g) = p.face_gram() {
        if !g.is_zero(1e-14) {
            c += g.as_matrix();
            pinned = true;
        }
    }
    let basis = if pinned {
        let cs = SymMatrix::symmetrized(c);
        let dec = cs.eigendecompose().ok()?;
        let kernel = dec.kernel_basis(1e-9 * (1.0 + cs.frob_norm()));
        if kernel.ncols() == 0 {
            return None;
        }
        kernel
    } else {
        DMatrix::identity(n, n)
    };
    Some(Reduced {
        q: p.objective().congruence(&basis),
        h: p.normalizer().congruence(&basis),
        eqs: eqs.iter().map(|b| b.congruence(&basis)).collect(),
        ineqs: p.ineq_blocks().iter().map(|b| b.congruence(&basis)).collect(),
        basis,
    })
}

impl Reduced {
    fn violation(&self, z: &DVector<f64>) -> f64 {
        let mut v: f64 = 0.0;
        for b in &self.ineqs {
            v = v.max(b.quad_form(z));
        }
        for b in &self.eqs {
            v = v.max(b.quad_form(z).abs());
        }
        v.max(0.0)
    }

    fn feasible(&self, z: &DVector<f64>) -> bool {
        self.violation(z) <= FEAS_TOL && (self.h.quad_form(z) - 1.0).abs() <= FEAS_TOL
    }
}

// --- local refinement ------------------------------------------------------------

/// Value and gradient of the penalized objective at the H-normalized point.
/// The objective is scale-invariant; iterates are kept normalized outside.
fn penalized(red: &Reduced, z: &DVector<f64>, rho: f64) -> (f64, DVector<f64>) {
    let form = |m: &SymMatrix| (m.quad_form(z), m.mul_vec(z) * 2.0);
    let (fq, gq) = form(&red.q);
    let mut val = fq;
    let mut grad = gq;
    for b in &red.ineqs {
        let (f, g) = form(b);
        if f > 0.0 {
            val += rho * f * f;
            grad += g * (2.0 * rho * f);
        }
    }
    for b in &red.eqs {
        let (f, g) = form(b);
        val += rho * f * f;
        grad += g * (2.0 * rho * f);
    }
    // project out the normalizer direction (the objective is evaluated on
    // the slice; motion along H'z only rescales)
    let hz = red.h.mul_vec(z) * 2.0;
    let hh = hz.dot(&hz);
    if hh > 1e-30 {
        let cval = grad.dot(&hz) / hh;
        grad -= hz * cval;
    }
    (val, grad)
}

fn renormalize(red: &Reduced, z: &DVector<f64>) -> Option<DVector<f64>> {
    let nu = red.h.quad_form(z);
    if nu <= 1e-12 {
        return None;
    }
    Some(z / nu.sqrt())
}

fn bfgs_stage(red: &Reduced, z0: &DVector<f64>, rho: f64, iters: usize) -> DVector<f64> {
    let d = z0.len();
    let mut z = z0.clone();
    let mut hinv = DMatrix::<f64>::identity(d, d);
    let (mut val, mut grad) = penalized(red, &z, rho);
    for _ in 0..iters {
        let gnorm = grad.norm();
        if gnorm <= 1e-12 * (1.0 + val.abs()) {
            break;
        }
        let dir = -(&hinv * &grad);
        let slope = grad.dot(&dir);
        let dir = if slope >= 0.0 { -grad.clone() } else { dir };
        let slope = grad.dot(&dir).min(-1e-16);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand = &z + &dir * t;
            if let Some(cand) = renormalize(red, &cand) {
                let (v, g) = penalized(red, &cand, rho);
                if v <= val + 1e-4 * t * slope {
                    accepted = Some((cand, v, g));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((z_new, v_new, g_new)) = accepted else {
            break;
        };
        let s = &z_new - &z;
        let y = &g_new - &grad;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            // BFGS update of the inverse Hessian
            let rho_b = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            hinv = &hinv
                - (&hy * s.transpose() + &s * hy.transpose()) * rho_b
                + &s * s.transpose() * (rho_b * (1.0 + rho_b * yhy));
        }
        z = z_new;
        val = v_new;
        grad = g_new;
    }
    z
}

/// Gauss-Newton steps toward the manifold {h-form = 1, eq forms = 0,
/// violated ineq forms = 0}.
fn restore_feasibility(red: &Reduced, z0: &DVector<f64>) -> DVector<f64> {
    let mut z = z0.clone();
    for _ in 0..5 {
        let mut rows: Vec<DVector<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        rows.push(red.h.mul_vec(&z) * 2.0);
        rhs.push(red.h.quad_form(&z) - 1.0);
        for b in &red.eqs {
            rows.push(b.mul_vec(&z) * 2.0);
            rhs.push(b.quad_form(&z));
        }
        for b in &red.ineqs {
            let f = b.quad_form(&z);
            if f > 0.0 {
                rows.push(b.mul_vec(&z) * 2.0);
                rhs.push(f);
            }
        }
        let worst = rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if worst <= 1e-13 {
            break;
        }
        let m = rows.len();
        let d = z.len();
        let jac = DMatrix::from_fn(m, d, |i, j| rows[i][j]);
        let r = DVector::from_fn(m, |i, _| rhs[i]);
        let svd = jac.svd(true, true);
        match svd.solve(&r, 1e-12) {
            Ok(step) => z -= step,
            Err(_) => break,
        }
    }
    z
}

// --- main entry points --------------------------------------------------------------

/// Samples `budget` directions (low-discrepancy and seeded Gaussian, 50/50),
/// keeps the best feasible point on the slice xᵀHx = 1, and polishes the
/// best candidates by penalized descent. Deterministic in (p, budget, seed).
pub fn oracle_min(p: &ConicQcqp, budget: usize, seed: u64) -> OracleResult {
    let Some(red) = project_problem(p) else {
        return OracleResult {
            best_value: None,
            best_x: None,
            samples_evaluated: 0,
            refined: false,
        };
    };
    let dim = red.q.n();
    if red.h.frob_norm() <= 1e-12 {
        return OracleResult {
            best_value: None,
            best_x: None,
            samples_evaluated: 0,
            refined: false,
        };
    }

    let ld = LowDiscrepancy::new(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, DVector<f64>)> = None;
    // refinement pool: (merit, point), lower merit is better
    let mut pool: Vec<(f64, DVector<f64>)> = Vec::new();
    let merit_weight = 100.0 * (1.0 + red.q.frob_norm());

    for idx in 0..budget {
        let raw = if idx % 2 == 0 {
            ld.gaussian(idx / 2, dim)
        } else {
            DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal))
        };
        let nu = red.h.quad_form(&raw);
        if nu <= 1e-10 {
            continue;
        }
        let z = raw / nu.sqrt();
        let viol = red.violation(&z);
        let value = red.q.quad_form(&z);
        if viol <= FEAS_TOL {
            let better = best.as_ref().map_or(true, |(v, _)| value < *v);
            if better {
                best = Some((value, z.clone()));
            }
        }
        let merit = value + merit_weight * viol;
        if pool.len() < REFINE_POOL {
            pool.push((merit, z));
            pool.sort_by(|a, b| a.0.total_cmp(&b.0));
        } else if merit < pool[REFINE_POOL - 1].0 {
            pool[REFINE_POOL - 1] = (merit, z);
            pool.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
    }

    // refine pool candidates plus the incumbent
    let mut refined = false;
    let mut starts: Vec<DVector<f64>> = pool.into_iter().map(|(_, z)| z).collect();
    if let Some((_, z)) = &best {
        starts.push(z.clone());
    }
    for z0 in starts {
        refined = true;
        let mut z = z0;
        let mut rho = 10.0 * (1.0 + red.q.frob_norm());
        for _ in 0..5 {
            z = bfgs_stage(&red, &z, rho, 60);
            rho *= 10.0;
        }
        z = restore_feasibility(&red, &z);
        if let Some(z) = renormalize(&red, &z) {
            let z = restore_feasibility(&red, &z);
            if red.feasible(&z) {
                let value = red.q.quad_form(&z);
                let better = best.as_ref().map_or(true, |(v, _)| value < *v);
                if better {
                    best = Some((value, z));
                }
            }
        }
    }

    match best {
        Some((value, z)) => {
            let x = &red.basis * z;
            OracleResult {
                best_value: Some(value),
                best_x: Some(x.iter().copied().collect()),
                samples_evaluated: budget,
                refined,
            }
        }
        None => OracleResult {
            best_value: None,
            best_x: None,
            samples_evaluated: budget,
            refined,
        },
    }
}

/// Minimum of [`oracle_min`] over the branches; ties go to the lowest
/// branch index. The per-branch seed is derived deterministically.
pub fn oracle_union(problems: &[ConicQcqp], budget: usize, seed: u64) -> OracleResult {
    let mut out = OracleResult {
        best_value: None,
        best_x: None,
        samples_evaluated: 0,
        refined: false,
    };
    for (i, p) in problems.iter().enumerate() {
        let r = oracle_min(p, budget, seed.wrapping_add(i as u64).wrapping_mul(0x9E37_79B9));
        out.samples_evaluated += r.samples_evaluated;
        out.refined |= r.refined;
        if let Some(v) = r.best_value {
            if out.best_value.map_or(true, |b| v < b) {
                out.best_value = Some(v);
                out.best_x = r.best_x;
            }
        }
    }
    out
}
