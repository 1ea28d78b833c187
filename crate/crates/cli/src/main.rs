//! Command-line front end: certify, solve and recover exact SDP relaxations
//! of nonconvex QCQPs stored in the JSON problem format.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sdpexact::certify;
use sdpexact::instances::{self, Family, InstanceSpec};
use sdpexact::model;
use sdpexact::pipeline::{self, PipelineOptions, RunVerdict};
use sdpexact::sdp::{self, SolveStatus, SolverOptions};
use sdpexact::ConicQcqp;

#[derive(Parser)]
#[command(
    name = "sdpexact",
    version,
    about = "Certify when a nonconvex QCQP is solved exactly by its SDP relaxation,\n\
             solve the relaxation, and recover a rank-1 optimal solution."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the exactness certificate only.
    Check {
        file: PathBuf,
        /// Margin tolerance for the certificate tests.
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        /// Emit the certificate as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Solve the SDP relaxation only.
    Solve {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        feas_tol: f64,
        #[arg(long, default_value_t = 1e-7)]
        gap_tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        /// Print one log line per interior-point iteration.
        #[arg(long)]
        verbose: bool,
        #[arg(long)]
        json: bool,
    },
    /// Full chain: certify, solve, recover, cross-check.
    Run {
        file: PathBuf,
        /// Enable the sampling baseline cross-check.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 200_000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Minimum over several problems sharing (Q, H).
    Union {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Generate an instance from a named family and write it to a file.
    Gen {
        #[arg(long)]
        family: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        l: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        face_dim: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a named demo instance and run the full chain on it.
    Demo {
        /// One of ex41, ex42, ex43, ex44, ex45, ex46.
        family: String,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Skip the sampling cross-check (enabled by default for n ≤ 6).
        #[arg(long)]
        no_oracle: bool,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        json: bool,
    },
}

fn load(path: &Path) -> Result<(ConicQcqp, Option<serde_json::Value>), String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    model::parse_document(&bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn verdict_exit(verdict: RunVerdict) -> ExitCode {
    match verdict {
        RunVerdict::ExactVerified | RunVerdict::RelaxationOnly | RunVerdict::Infeasible => {
            ExitCode::SUCCESS
        }
        RunVerdict::Failed => ExitCode::from(1),
    }
}

fn cmd_check(file: &Path, tol: f64, json: bool) -> Result<ExitCode, String> {
    let (p, _) = load(file)?;
    let cert = certify::certify_exactness(&p, tol).map_err(|e| e.to_string())?;
    if json {
        println!("{}", serde_json::to_string_pretty(&cert.to_json()).unwrap());
    } else {
        println!("verdict: {:?}", cert.verdict);
        for note in &cert.notes {
            println!("note: {note}");
        }
        if !cert.redundant.is_empty() {
            println!("redundant: {}", cert.redundant.join(", "));
        }
        for pair in &cert.pairs {
            let detail = match (pair.tau, pair.margin, pair.witness) {
                (Some(t), Some(m), _) => format!("tau {t:.6e} margin {m:.6e}"),
                (None, Some(m), _) => format!("margin {m:.6e}"),
                (_, _, Some(w)) => format!("witness {w:.6e}"),
                _ => "vacuous".into(),
            };
            println!(
                "{} ({}, {}): {} [{}]",
                pair.method,
                pair.k,
                pair.l,
                if pair.holds { "holds" } else { "FAILS" },
                detail
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_solve(
    file: &Path,
    opts: SolverOptions,
    json: bool,
) -> Result<ExitCode, String> {
    let (p, _) = load(file)?;
    let sol = sdp::solve(&p, &opts);
    if json {
        let v = serde_json::json!({
            "status": sol.status,
            "primal_obj": sol.primal_obj,
            "dual_obj": sol.dual_obj,
            "gap": sol.gap,
            "t": sol.t,
            "y_eq": sol.y_eq,
            "y_ineq": sol.y_ineq,
            "X": sol.x.to_rows(),
            "iterations": sol.iterations,
        });
        println!("{}", serde_json::to_string_pretty(&v).unwrap());
    } else {
        println!(
            "status: {}\nzeta_p: {:.12}\nzeta_d: {:.12}\ngap: {:.3e}\niterations: {}",
            sol.status, sol.primal_obj, sol.dual_obj, sol.gap, sol.iterations
        );
        if !sol.note.is_empty() {
            println!("note: {}", sol.note);
        }
    }
    Ok(match sol.status {
        SolveStatus::Optimal | SolveStatus::PrimalInfeasible | SolveStatus::DualInfeasible => {
            ExitCode::SUCCESS
        }
        _ => ExitCode::from(1),
    })
}

fn cmd_run(
    file: &Path,
    oracle: bool,
    budget: usize,
    seed: u64,
    json: bool,
) -> Result<ExitCode, String> {
    let (p, meta) = load(file)?;
    let mut opts = PipelineOptions::default();
    if oracle {
        opts.oracle_budget = Some(budget);
        opts.oracle_seed = seed;
    }
    let report = pipeline::run_with_meta(&p, &opts, meta);
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report.full_json()).unwrap()
        );
    } else {
        print!("{}", pipeline::render_text(&report));
    }
    Ok(verdict_exit(report.verdict))
}

fn cmd_union(
    files: &[PathBuf],
    oracle: bool,
    budget: usize,
    seed: u64,
    json: bool,
) -> Result<ExitCode, String> {
    let mut problems = Vec::new();
    for f in files {
        problems.push(load(f)?.0);
    }
    let mut opts = PipelineOptions::default();
    if oracle {
        opts.oracle_budget = Some(budget);
        opts.oracle_seed = seed;
    }
    let report = pipeline::run_union(&problems, &opts);
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::to_value(&report).unwrap()).unwrap()
        );
    } else {
        println!("verdict: {:?}", report.verdict);
        if let (Some(v), Some(b)) = (report.value, report.branch) {
            println!("minimum: {v:.12} attained on branch {b}");
        }
        for (i, bv) in report.branch_values.iter().enumerate() {
            match bv {
                Some(v) => println!("branch {i}: {v:.12}"),
                None => println!("branch {i}: infeasible"),
            }
        }
        for e in &report.errors {
            println!("error: {e}");
        }
    }
    Ok(verdict_exit(report.verdict))
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    family: &str,
    n: Option<usize>,
    l: Option<usize>,
    m: Option<usize>,
    gamma: Option<f64>,
    face_dim: Option<usize>,
    seed: u64,
    out: &Path,
) -> Result<ExitCode, String> {
    let family: Family = family.parse().map_err(|e| format!("{e}"))?;
    let mut spec = InstanceSpec::new(family, seed);
    spec.n = n;
    spec.l = l;
    spec.m = m;
    spec.gamma = gamma;
    spec.face_dim = face_dim;
    let p = instances::build(&spec).map_err(|e| e.to_string())?;
    let bytes = model::emit_document(&p, Some(spec.meta()));
    std::fs::write(out, bytes).map_err(|e| format!("{}: {e}", out.display()))?;
    println!("wrote {} (n = {})", out.display(), p.n());
    Ok(ExitCode::SUCCESS)
}

fn demo_blurb(family: Family) -> &'static str {
    match family {
        Family::Ex41 => {
            "minimize a pure quadratic under two ellipsoidal bounds; the slack \
             lift leaves a single inequality block, so the relaxation is exact \
             by itself"
        }
        Family::Ex42 => {
            "two quadratic equalities folded into one equality block; the \
             equality pair device certifies exactness"
        }
        Family::Ex43 => {
            "an interval constraint −1 ≤ q(u) ≤ 1 around an indefinite \
             quadratic; the lifted pair always sums to −2X_nn ⪯ 0, so the \
             pairwise test certifies"
        }
        Family::Ex44 => {
            "the interval problem with a ball of radius γ removed around the \
             origin; the pairwise test certifies exactly for γ ≤ 4/5"
        }
        Family::Ex45 => {
            "n inequality blocks with dominant negative diagonals; every \
             pairwise sum is diagonally dominant, hence PSD"
        }
        Family::Ex46 => {
            "a certified base instance restricted to a coordinate face \
             Ax = 0; faces of the PSD cone preserve exactness"
        }
        _ => "",
    }
}

fn cmd_demo(
    family: &str,
    gamma: Option<f64>,
    n: Option<usize>,
    seed: Option<u64>,
    no_oracle: bool,
    budget: Option<usize>,
    json: bool,
) -> Result<ExitCode, String> {
    let family: Family = family.parse().map_err(|e| format!("{e}"))?;
    if matches!(family, Family::RandomCertified | Family::RandomUncertified) {
        return Err("demo expects one of ex41..ex46 (use `gen` for the random families)".into());
    }
    let default_seed = match family {
        Family::Ex45 | Family::Ex46 => 7,
        _ => 0,
    };
    let mut spec = InstanceSpec::new(family, seed.unwrap_or(default_seed));
    spec.gamma = gamma;
    spec.n = n;
    if family == Family::Ex46 {
        spec.face_dim = Some(1);
    }
    let p = instances::build(&spec).map_err(|e| e.to_string())?;

    let mut opts = PipelineOptions::default();
    if !no_oracle && p.n() <= 6 {
        opts.oracle_budget = Some(budget.unwrap_or(200_000));
        opts.oracle_seed = spec.seed;
    }
    let report = pipeline::run_with_meta(&p, &opts, Some(spec.meta()));
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report.full_json()).unwrap()
        );
    } else {
        println!("demo {:?}: {}", family, demo_blurb(family));
        println!(
            "dimension {} with {} equality / {} inequality block(s){}",
            p.n(),
            p.eq_blocks().len(),
            p.ineq_blocks().len(),
            if p.face_rows().is_some() {
                " and a face"
            } else {
                ""
            }
        );
        print!("{}", pipeline::render_text(&report));
    }
    Ok(verdict_exit(report.verdict))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Check { file, tol, json } => cmd_check(file, *tol, *json),
        Cmd::Solve {
            file,
            feas_tol,
            gap_tol,
            max_iter,
            verbose,
            json,
        } => cmd_solve(
            file,
            SolverOptions {
                feas_tol: *feas_tol,
                gap_tol: *gap_tol,
                max_iter: *max_iter,
                verbose: *verbose,
            },
            *json,
        ),
        Cmd::Run {
            file,
            oracle,
            budget,
            seed,
            json,
        } => cmd_run(file, *oracle, *budget, *seed, *json),
        Cmd::Union {
            files,
            oracle,
            budget,
            seed,
            json,
        } => cmd_union(files, *oracle, *budget, *seed, *json),
        Cmd::Gen {
            family,
            n,
            l,
            m,
            gamma,
            face_dim,
            seed,
            out,
        } => cmd_gen(family, *n, *l, *m, *gamma, *face_dim, *seed, out),
        Cmd::Demo {
            family,
            gamma,
            n,
            seed,
            no_oracle,
            budget,
            json,
        } => cmd_demo(family, *gamma, *n, *seed, *no_oracle, *budget, *json),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
