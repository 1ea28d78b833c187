//! End-to-end orchestration: certify → solve → recover → cross-check, and
//! the report type the CLI renders.
//!
//! Verdict semantics:
//! * `ExactVerified` — the certificate holds, the SDP solved, a rank-1
//!   point was recovered and re-verified through an independent residual
//!   path, and the oracle (when enabled) agrees with the relaxation value.
//! * `RelaxationOnly` — the SDP solved but the chain above did not close;
//!   ζ_p is reported as a lower bound only. Recovery is attempted
//!   opportunistically either way and reported.
//! * `Infeasible` — the SDP is primal infeasible; by feasibility
//!   preservation the original QCQP is then infeasible too.
//! * `Failed` — a component failed outright (solver breakdown, bad input).
//!
//! Reports split into a stable section (deterministic given inputs and
//! seeds, suitable for golden-file testing) and a volatile one (timings,
//! iteration counts).

use std::time::Instant;

use serde::Serialize;

use crate::certify::{self, Certificate};
use crate::model::ConicQcqp;
use crate::oracle::{self, OracleResult};
use crate::recovery::{self, RankOneSolution};
use crate::sdp::{self, SolveStatus, SolverOptions};
use crate::Error;

/// Tolerances and switches for one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Margin tolerance for the certificate tests.
    pub cert_tol: f64,
    /// Activity threshold handed to recovery.
    pub recover_tol: f64,
    pub solver: SolverOptions,
    /// Sample budget for the sampling baseline; `None` skips it.
    pub oracle_budget: Option<usize>,
    pub oracle_seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            cert_tol: 1e-7,
            recover_tol: 1e-6,
            solver: SolverOptions::default(),
            oracle_budget: None,
            oracle_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunVerdict {
    ExactVerified,
    RelaxationOnly,
    Infeasible,
    Failed,
}

/// Deterministic slice of the solver outcome.
#[derive(Debug, Clone, Serialize)]
pub struct SdpSummary {
    pub status: SolveStatus,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub gap: f64,
}

/// Wall-clock timings and iteration counts (volatile section).
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub certify_ms: f64,
    pub solve_ms: f64,
    pub recover_ms: f64,
    pub oracle_ms: f64,
    pub sdp_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
    pub verdict: RunVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sdp: Option<SdpSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RankOneSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleResult>,
    /// Stage-labelled component errors.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
    #[serde(skip)]
    pub timings: Timings,
}

impl RunReport {
    /// Deterministic section only (timings and iteration counts excluded).
    pub fn stable_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }

    /// Stable section plus the volatile timing block.
    pub fn full_json(&self) -> serde_json::Value {
        let mut v = self.stable_json();
        v["timings"] = serde_json::to_value(&self.timings).expect("timings serialize");
        v
    }
}

/// Replays the residuals of a recovered point without going through the
/// recovery module's own report: plain loops over the raw matrix entries.
pub fn independent_residual_check(p: &ConicQcqp, x: &[f64], zeta: f64) -> bool {
    let n = p.n();
    if x.len() != n {
        return false;
    }
    let quad = |rows: &Vec<Vec<f64>>| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += x[i] * rows[i][j] * x[j];
            }
        }
        acc
    };
    let tol = recovery::VERIFY_FEAS_TOL;
    if (quad(&p.normalizer().to_rows()) - 1.0).abs() > tol {
        return false;
    }
    for b in p.eq_blocks() {
        if quad(&b.to_rows()).abs() > tol {
            return false;
        }
    }
    for b in p.ineq_blocks() {
        if quad(&b.to_rows()) > tol {
            return false;
        }
    }
    if let Some(a) = p.face_rows() {
        for i in 0..a.nrows() {
            let mut row = 0.0;
            for j in 0..n {
                row += a[(i, j)] * x[j];
            }
            if row.abs() > tol {
                return false;
            }
        }
    }
    (quad(&p.objective().to_rows()) - zeta).abs() <= recovery::VERIFY_OBJ_TOL * (1.0 + zeta.abs())
}

/// Runs the full chain on one problem. Component failures are captured in
/// the report rather than propagated.
pub fn run(p: &ConicQcqp, opts: &PipelineOptions) -> RunReport {
    run_with_meta(p, opts, None)
}

pub fn run_with_meta(
    p: &ConicQcqp,
    opts: &PipelineOptions,
    meta: Option<serde_json::Value>,
) -> RunReport {
    let mut report = RunReport {
        meta,
        verdict: RunVerdict::Failed,
        certificate: None,
        sdp: None,
        recovery: None,
        recovery_error: None,
        oracle: None,
        errors: Vec::new(),
        timings: Timings::default(),
    };

    let t0 = Instant::now();
    match certify::certify_exactness(p, opts.cert_tol) {
        Ok(cert) => report.certificate = Some(cert),
        Err(e) => report.errors.push(format!("certify: {e}")),
    }
    report.timings.certify_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t0 = Instant::now();
    let sol = sdp::solve(p, &opts.solver);
    report.timings.solve_ms = t0.elapsed().as_secs_f64() * 1e3;
    report.timings.sdp_iterations = sol.iterations;
    report.sdp = Some(SdpSummary {
        status: sol.status,
        primal_obj: sol.primal_obj,
        dual_obj: sol.dual_obj,
        gap: sol.gap,
    });

    match sol.status {
        SolveStatus::PrimalInfeasible => {
            report.verdict = RunVerdict::Infeasible;
            return report;
        }
        SolveStatus::Optimal => {}
        other => {
            report.errors.push(format!("solve: solver status {other}"));
            report.verdict = RunVerdict::Failed;
            return report;
        }
    }

    let t0 = Instant::now();
    let mut replay_ok = false;
    match recovery::recover(p, &sol, opts.recover_tol) {
        Ok(rec) => {
            replay_ok = independent_residual_check(p, &rec.x, sol.primal_obj);
            if !replay_ok {
                report
                    .errors
                    .push("recover: independent residual replay rejected the candidate".into());
            }
            report.recovery = Some(rec);
        }
        Err(e @ Error::NoVerifiedCandidate { .. }) | Err(e @ Error::RankReductionStall(_)) => {
            report.recovery_error = Some(e.to_string());
        }
        Err(e) => {
            report.errors.push(format!("recover: {e}"));
        }
    }
    report.timings.recover_ms = t0.elapsed().as_secs_f64() * 1e3;

    let mut oracle_agrees = true;
    if let Some(budget) = opts.oracle_budget {
        let t0 = Instant::now();
        let ores = oracle::oracle_min(p, budget, opts.oracle_seed);
        report.timings.oracle_ms = t0.elapsed().as_secs_f64() * 1e3;
        if let Some(best) = ores.best_value {
            let scale = 1.0 + sol.primal_obj.abs();
            oracle_agrees = (best - sol.primal_obj).abs() <= 1e-3 * scale;
            if !oracle_agrees {
                report.errors.push(format!(
                    "oracle: best sampled value {best:.6e} disagrees with ζ_p {:.6e}",
                    sol.primal_obj
                ));
            }
        } else {
            oracle_agrees = false;
            report
                .errors
                .push("oracle: no feasible point found within the budget".into());
        }
        report.oracle = Some(ores);
    }

    let certified = report
        .certificate
        .as_ref()
        .map(|c| c.is_certified())
        .unwrap_or(false);
    let recovered = report
        .recovery
        .as_ref()
        .map(|r| r.verified)
        .unwrap_or(false);

    report.verdict = if certified && recovered && replay_ok && oracle_agrees {
        RunVerdict::ExactVerified
    } else {
        RunVerdict::RelaxationOnly
    };
    report
}

/// Union report: branch values, winning branch and its recovered point,
/// with an optional sampling cross-check over the union.
#[derive(Debug, Clone, Serialize)]
pub struct UnionReport {
    pub verdict: RunVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<usize>,
    pub branch_values: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RankOneSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

pub fn run_union(problems: &[ConicQcqp], opts: &PipelineOptions) -> UnionReport {
    let mut report = UnionReport {
        verdict: RunVerdict::Failed,
        value: None,
        branch: None,
        branch_values: Vec::new(),
        recovery: None,
        oracle: None,
        errors: Vec::new(),
    };
    match recovery::solve_union(problems, &opts.solver, opts.recover_tol) {
        Ok(u) => {
            report.value = Some(u.value);
            report.branch = Some(u.branch);
            report.branch_values = u.branch_values;
            report.recovery = Some(u.solution);
            report.verdict = RunVerdict::ExactVerified;
        }
        Err(Error::UnionInfeasible) => {
            report.verdict = RunVerdict::Infeasible;
        }
        Err(e) => {
            report.errors.push(format!("union: {e}"));
            return report;
        }
    }
    if let Some(budget) = opts.oracle_budget {
        let ores = oracle::oracle_union(problems, budget, opts.oracle_seed);
        if let (Some(v), Some(best)) = (report.value, ores.best_value) {
            if (v - best).abs() > 1e-3 * (1.0 + v.abs()) {
                report.errors.push(format!(
                    "oracle: union best {best:.6e} disagrees with branch minimum {v:.6e}"
                ));
                report.verdict = RunVerdict::RelaxationOnly;
            }
        }
        report.oracle = Some(ores);
    }
    report
}

/// Human-readable rendering of a report.
pub fn render_text(report: &RunReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "verdict: {:?}", report.verdict);
    if let Some(cert) = &report.certificate {
        let _ = writeln!(out, "certificate: {:?}", cert.verdict);
        for note in &cert.notes {
            let _ = writeln!(out, "  note: {note}");
        }
        if !cert.redundant.is_empty() {
            let _ = writeln!(out, "  redundant: {}", cert.redundant.join(", "));
        }
        for pair in cert.pairs.iter().filter(|p| !p.holds) {
            let detail = match (pair.margin, pair.witness) {
                (Some(m), _) => format!("margin {m:.3e}"),
                (None, Some(w)) => format!("witness {w:.3e}"),
                _ => String::new(),
            };
            let _ = writeln!(
                out,
                "  failed {} pair ({}, {}): {detail}",
                pair.method, pair.k, pair.l
            );
        }
    }
    if let Some(sdp) = &report.sdp {
        let _ = writeln!(
            out,
            "sdp: {} zeta_p {:.9} zeta_d {:.9} gap {:.3e}",
            sdp.status, sdp.primal_obj, sdp.dual_obj, sdp.gap
        );
    }
    if let Some(rec) = &report.recovery {
        let xs: Vec<String> = rec.x.iter().map(|v| format!("{v:.6}")).collect();
        let _ = writeln!(
            out,
            "recovery: verified={} objective {:.9} provenance {:?}",
            rec.verified, rec.objective, rec.provenance
        );
        let _ = writeln!(out, "  x = [{}]", xs.join(", "));
    }
    if let Some(err) = &report.recovery_error {
        let _ = writeln!(out, "recovery: {err}");
    }
    if let Some(o) = &report.oracle {
        match o.best_value {
            Some(v) => {
                let _ = writeln!(
                    out,
                    "oracle: best {v:.9} over {} samples (refined: {})",
                    o.samples_evaluated, o.refined
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "oracle: no feasible point found ({} samples)",
                    o.samples_evaluated
                );
            }
        }
    }
    for e in &report.errors {
        let _ = writeln!(out, "error: {e}");
    }
    out
}
