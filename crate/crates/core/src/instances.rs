//! Canonical and random instance families used by tests, benchmarks and the
//! CLI demos.
//!
//! The `ex41`…`ex46` families are small named constructions exercising the
//! certificate machinery in qualitatively different ways:
//!
//! * `ex41` — two ellipsoidal bounds on a pure quadratic, slack-lifted into
//!   a single-inequality homogeneous problem;
//! * `ex42` — two quadratic equalities, folded into one equality block;
//! * `ex43` — an interval constraint −1 ≤ q(u) ≤ 1 (indefinite trust-region
//!   type), sign-lifted into a certified inequality pair;
//! * `ex44` — `ex43` plus a ball-removal constraint ‖u‖²/γ ≥ γ, certified
//!   pairwise exactly when γ ≤ 4/5;
//! * `ex45` — n blocks with dominant negative diagonals, every pairwise sum
//!   diagonally dominant and hence PSD;
//! * `ex46` — any base instance restricted to a coordinate face Ax = 0.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certify::{self, Verdict};
use crate::error::Error;
use crate::model::{homogenize, ConicQcqp, InhomQcqp, QuadConstraint, Sense};
use crate::sym::SymMatrix;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ex41,
    Ex42,
    Ex43,
    Ex44,
    Ex45,
    Ex46,
    RandomCertified,
    RandomUncertified,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ex41" => Family::Ex41,
            "ex42" => Family::Ex42,
            "ex43" => Family::Ex43,
            "ex44" => Family::Ex44,
            "ex45" => Family::Ex45,
            "ex46" => Family::Ex46,
            "random-certified" | "randomcertified" => Family::RandomCertified,
            "random-uncertified" | "randomuncertified" => Family::RandomUncertified,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown family \"{other}\""
                )))
            }
        })
    }
}

/// Parameters of one generated instance. Unset fields take family defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub family: Family,
    /// Pre-lift dimension for ex41/ex43/ex44.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    /// Ambient dimension for ex42/ex45/ex46 and the random families.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Constraint count for the random families.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Ball-removal radius parameter (ex44), must be positive.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Number of coordinates pinned by the ex46 face.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub face_dim: Option<usize>,
    pub seed: u64,
    /// Known optimum for regression, when the family provides one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
}

impl InstanceSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        InstanceSpec {
            family,
            l: None,
            n: None,
            m: None,
            gamma: None,
            face_dim: None,
            seed,
            expected: None,
        }
    }

    pub fn meta(&self) -> serde_json::Value {
        serde_json::json!({ "generator": self })
    }
}

fn gaussian_sym(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    SymMatrix::from_fn(n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal))
}

fn unit_frob(m: SymMatrix) -> SymMatrix {
    let norm = m.frob_norm();
    if norm > 0.0 {
        m.scale(1.0 / norm)
    } else {
        m
    }
}

fn gaussian_pd(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    SymMatrix::symmetrized(&g * g.transpose() / n as f64).add_scaled_identity(0.5)
}

// --- named constructions -----------------------------------------------------

/// Slack lift of: minimize uᵀQ₀u s.t. uᵀQ₁u ≤ 1, uᵀQ₂u ≤ 1 (the second
/// constraint absorbed into the normalizer).
pub fn ex41(q0: &SymMatrix, q1: &SymMatrix, q2: &SymMatrix) -> Result<ConicQcqp> {
    let l = q0.n();
    let mk = |q: &SymMatrix| QuadConstraint {
        q: q.clone(),
        b: DVector::zeros(l),
        c: -1.0,
        sense: Sense::Le,
    };
    homogenize(&InhomQcqp {
        l,
        q0: q0.clone(),
        b0: DVector::zeros(l),
        c0: 0.0,
        constraints: vec![mk(q1), mk(q2)],
        normalizer: Some(1),
    })
}

/// Two quadratic equalities xᵀBx = 1, xᵀHx = 1 folded into the single
/// equality block B − H over the normalizer H.
pub fn ex42(b: &SymMatrix, h: &SymMatrix, q: &SymMatrix) -> Result<ConicQcqp> {
    ConicQcqp::new(q.clone(), h.clone(), vec![b.sub(h)], vec![])
}

/// Sign lift of: minimize uᵀQ₀u + 2b₀ᵀu s.t. −1 ≤ uᵀQ₁u + 2b₁ᵀu ≤ 1.
pub fn ex43(
    q0: &SymMatrix,
    b0: &DVector<f64>,
    q1: &SymMatrix,
    b1: &DVector<f64>,
) -> Result<ConicQcqp> {
    homogenize(&InhomQcqp {
        l: q0.n(),
        q0: q0.clone(),
        b0: b0.clone(),
        c0: 0.0,
        constraints: vec![QuadConstraint {
            q: q1.clone(),
            b: b1.clone(),
            c: 0.0,
            sense: Sense::Range { lo: -1.0, hi: 1.0 },
        }],
        normalizer: None,
    })
}

/// `ex43` plus the ball-removal constraint ‖u‖²/γ ≥ γ.
pub fn ex44(
    q0: &SymMatrix,
    b0: &DVector<f64>,
    q1: &SymMatrix,
    b1: &DVector<f64>,
    gamma: f64,
) -> Result<ConicQcqp> {
    if gamma <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive (got {gamma})"
        )));
    }
    let l = q0.n();
    homogenize(&InhomQcqp {
        l,
        q0: q0.clone(),
        b0: b0.clone(),
        c0: 0.0,
        constraints: vec![
            QuadConstraint {
                q: q1.clone(),
                b: b1.clone(),
                c: 0.0,
                sense: Sense::Range { lo: -1.0, hi: 1.0 },
            },
            QuadConstraint {
                q: SymMatrix::identity(l).scale(-1.0 / gamma),
                b: DVector::zeros(l),
                c: gamma,
                sense: Sense::Le,
            },
        ],
        normalizer: None,
    })
}

/// Canonical ball-removal parameters: q₀(u) = ‖u‖², the interval constraint
/// reads −1 ≤ u_ℓ ≤ 1 (Q₁ = O, b₁ = (0,…,0,1/2)). The optimum is γ² for
/// 0 < γ ≤ 1.
pub fn ex44_canonical(l: usize, gamma: f64) -> Result<ConicQcqp> {
    let mut b1 = DVector::zeros(l);
    b1[l - 1] = 0.5;
    ex44(
        &SymMatrix::identity(l),
        &DVector::zeros(l),
        &SymMatrix::zeros(l),
        &b1,
        gamma,
    )
}

/// n blocks whose diagonals are dominated by strong negative entries:
/// [B_k]_kk ∈ (0,1], [B_k]_ii ∈ [−3,−2] for i ≠ k, off-diagonals in
/// [−1/(2n), 1/(2n)]. Every pairwise sum −(B_k + B_ℓ) is diagonally
/// dominant, hence PSD. H = I; Q defaults to a unit-norm Gaussian.
pub fn ex45(n: usize, seed: u64, q: Option<SymMatrix>) -> Result<ConicQcqp> {
    if n < 2 {
        return Err(Error::InvalidParameter("ex45 requires n ≥ 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let off = 1.0 / (2.0 * n as f64);
    let mut blocks = Vec::with_capacity(n);
    for k in 0..n {
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = if i == j {
                    if i == k {
                        rng.gen_range(0.0..1.0_f64).max(1e-3)
                    } else {
                        rng.gen_range(-3.0..-2.0)
                    }
                } else {
                    rng.gen_range(-off..off)
                };
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        blocks.push(SymMatrix::from_rows(&rows, 1e-12)?);
    }
    let q = q.unwrap_or_else(|| unit_frob(gaussian_sym(n, &mut rng)));
    ConicQcqp::new(q, SymMatrix::identity(n), vec![], blocks)
}

/// Restricts a base instance to the coordinate face x_1 = … = x_r = 0.
pub fn ex46(base: ConicQcqp, face_dim: usize) -> Result<ConicQcqp> {
    let n = base.n();
    if face_dim == 0 || face_dim >= n {
        return Err(Error::InvalidParameter(format!(
            "face_dim must be in 1..n (got {face_dim})"
        )));
    }
    let a = DMatrix::from_fn(face_dim, n, |i, j| if i == j { 1.0 } else { 0.0 });
    base.attach_face(a)
}

pub fn random_certified(n: usize, m: usize, seed: u64) -> Result<ConicQcqp> {
    const CAP: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..CAP {
        let off = 3.0 / (2.0 * n as f64);
        let blocks: Vec<SymMatrix> = (0..m)
            .map(|_| {
                let noise = SymMatrix::from_fn(n, |_, _| rng.gen_range(-off..off));
                let shift = rng.gen_range(1.0..1.5);
                noise.add_scaled_identity(-shift)
            })
            .collect();
        let q = unit_frob(gaussian_sym(n, &mut rng));
        let p = ConicQcqp::new(q, SymMatrix::identity(n), vec![], blocks)?;
        if certify::certify_exactness(&p, 1e-9)?.is_certified() {
            return Ok(p);
        }
    }
    Err(Error::DrawCapExceeded {
        family: "random-certified".into(),
        cap: CAP,
    })
}

pub fn random_uncertified(n: usize, m: usize, seed: u64) -> Result<ConicQcqp> {
    const CAP: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..CAP {
        let blocks: Vec<SymMatrix> = (0..m.max(2)).map(|_| gaussian_sym(n, &mut rng)).collect();
        let q = unit_frob(gaussian_sym(n, &mut rng));
        let p = ConicQcqp::new(q, SymMatrix::identity(n), vec![], blocks)?;
        if certify::certify_exactness(&p, 1e-9)?.verdict == Verdict::ConditionFails {
            return Ok(p);
        }
    }
    Err(Error::DrawCapExceeded {
        family: "random-uncertified".into(),
        cap: CAP,
    })
}

/// Builds the instance a spec describes. Canonical parameters are used
/// where the family defines them; random data is drawn deterministically
/// from the seed.
pub fn build(spec: &InstanceSpec) -> Result<ConicQcqp> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.family {
        Family::Ex41 => {
            let l = spec.l.unwrap_or(1);
            if l == 1 {
                // canonical scalars: Q0 = −1, Q1 = 1, Q2 = 2; optimum −1/2
                ex41(
                    &SymMatrix::from_diagonal(&[-1.0]),
                    &SymMatrix::from_diagonal(&[1.0]),
                    &SymMatrix::from_diagonal(&[2.0]),
                )
            } else {
                let q0 = gaussian_sym(l, &mut rng);
                let q1 = gaussian_pd(l, &mut rng);
                let q2 = gaussian_pd(l, &mut rng);
                ex41(&q0, &q1, &q2)
            }
        }
        Family::Ex42 => {
            let n = spec.n.unwrap_or(2);
            if n == 2 {
                // canonical: B = diag(2,1), H = I, Q = diag(3,5); optimum 5
                ex42(
                    &SymMatrix::from_diagonal(&[2.0, 1.0]),
                    &SymMatrix::identity(2),
                    &SymMatrix::from_diagonal(&[3.0, 5.0]),
                )
            } else {
                let b = gaussian_pd(n, &mut rng);
                ex42(&b, &SymMatrix::identity(n), &gaussian_sym(n, &mut rng))
            }
        }
        Family::Ex43 => {
            let l = spec.l.unwrap_or(1);
            if l == 1 && spec.seed == 0 {
                // canonical: q₀ = u², constraint −1 ≤ u ≤ 1; optimum 0
                ex43(
                    &SymMatrix::from_diagonal(&[1.0]),
                    &DVector::zeros(1),
                    &SymMatrix::zeros(1),
                    &DVector::from_row_slice(&[0.5]),
                )
            } else {
                // positive-definite objective keeps the infimum finite on
                // the unbounded feasible set
                let q0 = gaussian_pd(l, &mut rng);
                let b0 = DVector::from_fn(l, |_, _| {
                    rng.sample::<f64, _>(rand_distr::StandardNormal)
                });
                let q1 = gaussian_sym(l, &mut rng);
                let b1 = DVector::from_fn(l, |_, _| {
                    rng.sample::<f64, _>(rand_distr::StandardNormal)
                });
                ex43(&q0, &b0, &q1, &b1)
            }
        }
        Family::Ex44 => {
            let l = spec.l.unwrap_or(1);
            let gamma = spec.gamma.unwrap_or(0.8);
            ex44_canonical(l, gamma)
        }
        Family::Ex45 => {
            let n = spec.n.unwrap_or(4);
            ex45(n, spec.seed, None)
        }
        Family::Ex46 => {
            let n = spec.n.unwrap_or(4);
            let base = ex45(n, spec.seed, None)?;
            ex46(base, spec.face_dim.unwrap_or(1))
        }
        Family::RandomCertified => {
            random_certified(spec.n.unwrap_or(4), spec.m.unwrap_or(3), spec.seed)
        }
        Family::RandomUncertified => {
            random_uncertified(spec.n.unwrap_or(3), spec.m.unwrap_or(2), spec.seed)
        }
    }
}
