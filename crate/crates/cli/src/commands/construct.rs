//! `construct`: search for an admissible conformal factor by exponential
//! height doubling, with the hypothesis audit up front.

use ccl_core::geom::conformal::{construct_admissible, ADMISSIBILITY_TOL};
use ccl_core::io::write_scalar_field;
use serde::Serialize;

use crate::config::{decode, ConstructCfg, Loaded};
use crate::manifest::Sink;
use crate::{CommandOutcome, RunResult, EXIT_FINDING};

use super::Artifact;

#[derive(Serialize)]
struct Payload {
    hypothesis_ok: bool,
    hypothesis_notes: Vec<String>,
    tried: Vec<f64>,
    accepted_n: Option<f64>,
    final_margin: f64,
    worst_node: Vec<usize>,
    accepted_field_file: Option<String>,
    tol: f64,
}

pub fn run(loaded: &Loaded, sink: &mut Sink) -> RunResult<CommandOutcome> {
    let cfg: ConstructCfg = decode(loaded)?;
    cfg.manifold.validate()?;
    cfg.cone.validate()?;
    let tol = loaded.tol.unwrap_or(ADMISSIBILITY_TOL);

    let report = construct_admissible::<f64>(
        &cfg.manifold,
        &cfg.cone,
        cfg.tau,
        cfg.alpha,
        &cfg.height,
        cfg.n_max,
        tol,
    )?;

    let accepted_field_file = match &report.accepted_field {
        Some(field) => {
            let rel = "ubar.grid";
            write_scalar_field(&sink.path(rel), field)?;
            sink.adopt_file(rel)?;
            Some(rel.to_string())
        }
        None => None,
    };

    let payload = Payload {
        hypothesis_ok: report.hypothesis_ok,
        hypothesis_notes: report.hypothesis_notes.clone(),
        tried: report.tried.clone(),
        accepted_n: report.accepted_n,
        final_margin: report.final_margin,
        worst_node: report.worst_node.clone(),
        accepted_field_file,
        tol,
    };
    sink.put_json("construct.json", &Artifact::new("construct", loaded.seed, &payload))?;

    match (report.hypothesis_ok, report.accepted_n) {
        (true, Some(nfac)) => Ok(CommandOutcome::ok(format!(
            "admissible factor at height {nfac} with margin {:.3e}",
            report.final_margin
        ))),
        (false, _) => Ok(CommandOutcome {
            exit: EXIT_FINDING,
            headline: format!(
                "hypotheses not met: {}",
                report.hypothesis_notes.join("; ")
            ),
        }),
        (true, None) => Ok(CommandOutcome {
            exit: EXIT_FINDING,
            headline: format!(
                "no admissible factor up to height {}; final margin {:.3e}",
                cfg.n_max, report.final_margin
            ),
        }),
    }
}
