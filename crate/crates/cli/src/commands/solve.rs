//! `solve`: grid Newton solve of the reduced equation, or the radial
//! continuation when the geometry is the punctured-ball chart.

use ccl_core::cones::invariants::compute_theta;
use ccl_core::io::{read_scalar_field, write_scalar_field};
use ccl_core::solver::{
    solve_newton, solve_radial, NewtonOptions, ProblemSpec, PsiSpec, RadialOptions, RadialRun,
    SolveReport,
};
use ccl_core::{Manifold, ScalarField, SymmetricFunctionSpec};
use serde::Serialize;

use crate::config::{decode, InitCfg, Loaded, SolveCfg, ThetaRefCfg};
use crate::manifest::Sink;
use crate::{CommandOutcome, RunError, RunResult, EXIT_FINDING, EXIT_VIOLATION};

use super::Artifact;

pub fn run(loaded: &Loaded, sink: &mut Sink) -> RunResult<CommandOutcome> {
    let cfg: SolveCfg = decode(loaded)?;
    if matches!(cfg.problem.manifold, Manifold::RadialBall { .. }) {
        run_radial(&cfg, loaded, sink)
    } else {
        run_grid(&cfg, loaded, sink)
    }
}

#[derive(Serialize)]
struct RadialPayload {
    run: RadialRun,
    profile_file: String,
}

fn run_radial(cfg: &SolveCfg, loaded: &Loaded, sink: &mut Sink) -> RunResult<CommandOutcome> {
    let spec = &cfg.problem;
    spec.manifold.validate()?;
    if spec.tau != 1.0 || spec.alpha != -1.0 {
        return Err(RunError::config(format!(
            "radial continuation is the direct trace path; needs tau = 1, alpha = -1, got tau = {}, alpha = {}",
            spec.tau, spec.alpha
        )));
    }
    let trace_family = matches!(spec.f, SymmetricFunctionSpec::Sigma1 { .. })
        || matches!(spec.f, SymmetricFunctionSpec::SigmaKRoot { k: 1, .. });
    if !trace_family {
        return Err(RunError::config(
            "radial continuation supports only the trace family",
        ));
    }
    let psi = match &spec.psi {
        PsiSpec::Constant { value } => *value,
        other => {
            return Err(RunError::config(format!(
                "radial continuation needs a constant density, got {other:?}"
            )))
        }
    };

    let mut opts = RadialOptions::default();
    if let Some(r) = cfg.radial.as_ref() {
        if let Some(m) = r.mesh_ratio {
            opts.mesh_ratio = m;
        }
        if let Some(s) = &r.stages {
            opts.stages = s.clone();
        }
        if let Some(p) = r.prefactor {
            opts.prefactor = p;
        }
        if let Some(t) = r.tol {
            opts.tol = t;
        }
        if let Some(m) = r.max_iters {
            opts.max_iters = m;
        }
    }
    if let Some(t) = loaded.tol {
        opts.tol = t;
    }

    let run = solve_radial::<f64>(spec.manifold.dim(), psi, &opts)?;

    let mut csv = csv::WriterBuilder::new().from_writer(Vec::new());
    csv.write_record(["r", "u"])?;
    for (r, u) in run.r.iter().zip(&run.u) {
        csv.write_record([format!("{r:.17e}"), format!("{u:.17e}")])?;
    }
    let bytes = csv.into_inner().map_err(|e| RunError::config(e.to_string()))?;
    sink.put_bytes("profile.csv", &bytes)?;

    let headline = format!(
        "radial profile over {} nodes, inner deviation {:.3e}, monotone gap {:.3e}",
        run.r.len(),
        run.sup_err_inner,
        run.monotone_min_gap
    );
    let payload = RadialPayload { run, profile_file: "profile.csv".to_string() };
    sink.put_json("radial.json", &Artifact::new("solve", loaded.seed, &payload))?;
    Ok(CommandOutcome::ok(headline))
}

#[derive(Serialize)]
struct GridPayload<'a> {
    problem: &'a ProblemSpec,
    report: &'a SolveReport,
    solution_file: String,
    history_file: String,
}

fn run_grid(cfg: &SolveCfg, loaded: &Loaded, sink: &mut Sink) -> RunResult<CommandOutcome> {
    if cfg.radial.is_some() {
        return Err(RunError::config(
            "radial options make sense only on the punctured-ball chart",
        ));
    }
    let problem = ccl_core::solver::ReducedProblem::<f64>::new(cfg.problem.clone())?;
    let grid = problem.geo.grid.clone();

    let mut opts = NewtonOptions::<f64>::default();
    if let Some(t) = cfg.newton.tol {
        opts.tol = t;
    }
    if let Some(t) = loaded.tol {
        opts.tol = t;
    }
    if let Some(m) = cfg.newton.max_iters {
        opts.max_iters = m;
    }
    if let Some(t) = cfg.newton.lin_tol {
        opts.lin_tol = t;
    }
    if let Some(m) = cfg.newton.lin_max {
        opts.lin_max = m;
    }
    opts.theta_reference = match &cfg.newton.theta_reference {
        Some(ThetaRefCfg::Value { value }) => Some(*value),
        Some(ThetaRefCfg::Certified { budget }) => {
            Some(compute_theta(problem.op.domain(), loaded.seed, *budget)?.0)
        }
        None => None,
    };
    opts.init = match &cfg.init {
        None | Some(InitCfg::Zero) => None,
        Some(InitCfg::Field { spec }) => Some(spec.realize::<f64>(&grid)?),
        Some(InitCfg::TargetOffset { spec }) => {
            let target = problem.target.as_ref().ok_or_else(|| {
                RunError::config("target_offset init needs a manufactured density")
            })?;
            let offset = spec.realize::<f64>(&grid)?;
            let mut init = ScalarField::<f64>::zeros(grid.clone());
            for m in 0..grid.total_nodes() {
                init.set(m, target.get(m) + offset.get(m));
            }
            Some(init)
        }
        Some(InitCfg::GridFile { path }) => Some(read_scalar_field::<f64>(path, &grid)?),
    };

    let (u, report) = solve_newton(&problem, &opts)?;

    write_scalar_field(&sink.path("u.grid"), &u)?;
    sink.adopt_file("u.grid")?;

    let mut csv = csv::WriterBuilder::new().from_writer(Vec::new());
    csv.write_record(["iter", "residual", "step_norm", "theta_floor", "damping"])?;
    for rec in &report.history {
        csv.write_record([
            rec.iter.to_string(),
            format!("{:.17e}", rec.residual),
            format!("{:.17e}", rec.step_norm),
            format!("{:.17e}", rec.theta_floor),
            format!("{:.17e}", rec.damping),
        ])?;
    }
    let bytes = csv.into_inner().map_err(|e| RunError::config(e.to_string()))?;
    sink.put_bytes("history.csv", &bytes)?;

    let payload = GridPayload {
        problem: &cfg.problem,
        report: &report,
        solution_file: "u.grid".to_string(),
        history_file: "history.csv".to_string(),
    };
    sink.put_json("report.json", &Artifact::new("solve", loaded.seed, &payload))?;

    if !report.converged {
        return Ok(CommandOutcome {
            exit: EXIT_VIOLATION,
            headline: format!(
                "did not converge in {} iterations; residual {:.3e}",
                report.iterations, report.residual_sup
            ),
        });
    }
    if !report.interior_all_iterates {
        return Ok(CommandOutcome {
            exit: EXIT_FINDING,
            headline: format!(
                "converged but an iterate left the cone interior (worst margin {:.3e})",
                report.worst_margin
            ),
        });
    }
    let target_note = match report.target_sup_error {
        Some(e) => format!(", target error {e:.3e}"),
        None => String::new(),
    };
    Ok(CommandOutcome::ok(format!(
        "converged in {} iterations, residual {:.3e}{target_note}",
        report.iterations, report.residual_sup
    )))
}
