//! `verify-identities`: round-off residuals for the algebraic identities and
//! a grid refinement study comparing the conformal transformation formula
//! against direct stencil curvature of the warped metric.

use ccl_core::geom::conformal::{
    additivity_gap, base_geometry, conformal_modified_schouten, exp_height_identity_gap,
    reduction_vs_conformal_gap, trace_identity_gap, ConformalFactor, ReductionConstants,
};
use ccl_core::geom::curvature::curvature;
use ccl_core::linalg::SymMat;
use ccl_core::{FieldSpec, Manifold};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{decode, HeightsCfg, IdentitiesCfg, Loaded, OrderStudyCfg};
use crate::manifest::Sink;
use crate::{CommandOutcome, RunResult, EXIT_VIOLATION};

use super::{item_seed, Artifact};

/// Identity residuals are pure per-node algebra over shared derivative
/// caches, so round-off is the only admissible slack.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Observed convergence order floor for the refinement study; the formula
/// side uses second-order caches, so two is the model order.
pub const ORDER_FLOOR: f64 = 1.8;

#[derive(Serialize)]
struct TraceBlock {
    sizes: Vec<usize>,
    pairs: Vec<(f64, f64)>,
    trials_per_case: usize,
    max_gap: f64,
}

#[derive(Serialize)]
struct GapBlock {
    max_gap: f64,
}

#[derive(Serialize)]
struct OrderBlock {
    grids: Vec<usize>,
    gaps: Vec<f64>,
    observed_orders: Vec<f64>,
    min_order: f64,
}

#[derive(Serialize)]
struct Payload {
    tol: f64,
    order_floor: f64,
    manifold: Manifold,
    tau: f64,
    alpha: f64,
    trace_identity: TraceBlock,
    additivity: GapBlock,
    exp_height: GapBlock,
    reduction_vs_conformal: GapBlock,
    order_study: OrderBlock,
}

fn default_manifold() -> Manifold {
    let phi = FieldSpec::Sum {
        terms: vec![
            FieldSpec::sin_axis(0, 0.07, 1.0, 0.1),
            FieldSpec::cos_axis(1, 0.05, 1.0, 0.0),
            FieldSpec::cos_axis(3, 0.04, 1.0, 0.2),
        ],
    };
    Manifold::conformal_torus(4, 12, phi)
}

fn default_heights() -> HeightsCfg {
    HeightsCfg {
        a: FieldSpec::cos_axis(0, 0.5, 1.0, 0.0),
        b: FieldSpec::Sum {
            terms: vec![
                FieldSpec::sin_axis(1, 0.4, 1.0, 0.3),
                FieldSpec::cos_axis(2, 0.25, 2.0, 0.0),
            ],
        },
        exp_height: FieldSpec::Sum {
            terms: vec![
                FieldSpec::constant(-1.4),
                FieldSpec::cos_axis(0, 0.3, 1.0, 0.0),
                FieldSpec::sin_axis(1, 0.1, 1.0, 0.0),
            ],
        },
        exp_scale: 2.0,
    }
}

fn default_order_study() -> OrderStudyCfg {
    OrderStudyCfg {
        phi: FieldSpec::Sum {
            terms: vec![
                FieldSpec::sin_axis(0, 0.08, 1.0, 0.0),
                FieldSpec::cos_axis(2, 0.06, 1.0, 0.3),
            ],
        },
        grids: vec![12, 16, 20],
        tau: 3.0,
        alpha: 1.0,
    }
}

pub fn run(loaded: &Loaded, sink: &mut Sink, _threads: usize) -> RunResult<CommandOutcome> {
    let cfg: IdentitiesCfg = decode(loaded)?;
    let tol = loaded.tol.unwrap_or(IDENTITY_TOL);
    let manifold = cfg.manifold.clone().unwrap_or_else(default_manifold);
    manifold.validate()?;
    let heights = cfg.heights.clone().unwrap_or_else(default_heights);
    let study = cfg.order_study.clone().unwrap_or_else(default_order_study);
    if study.grids.len() < 2 {
        return Err(crate::RunError::config("order study needs at least two grids"));
    }

    // Matrix-level trace identity on random symmetric inputs.
    let sizes = vec![3usize, 4, 5, 6];
    let pairs = vec![(3.0, 1.0), (0.5, -1.0), (4.0, 1.0), (-2.0, -1.0)];
    let trials = cfg.trials.max(1);
    let mut max_trace_gap = 0.0f64;
    for (ci, &n) in sizes.iter().enumerate() {
        for (pi, &(tau, alpha)) in pairs.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(item_seed(loaded.seed, ci * 101 + pi));
            for _ in 0..trials {
                let mut s = SymMat::zeros(n);
                for i in 0..n {
                    for j in i..n {
                        s.set(i, j, rng.gen_range(-1.0..1.0));
                    }
                }
                let gap = trace_identity_gap(&s, tau, alpha)?;
                max_trace_gap = max_trace_gap.max(gap);
            }
        }
    }

    // Reduction identities on the configured manifold, one shared cache per
    // height field.
    let geo = base_geometry::<f64>(&manifold)?;
    let k = ReductionConstants::new(geo.n, cfg.tau, cfg.alpha)?;
    let a = ConformalFactor::from_spec(&heights.a, &geo.grid)?;
    let b = ConformalFactor::from_spec(&heights.b, &geo.grid)?;
    let v = ConformalFactor::from_spec(&heights.exp_height, &geo.grid)?;
    let additivity = additivity_gap(&geo, &a, &b, &k)?;
    let exp_height = exp_height_identity_gap(&geo, &v, heights.exp_scale, &k)?;
    let reduction_vs_conformal = reduction_vs_conformal_gap(&geo, &a.add(&b), &k)?;

    // Refinement study: transformation formula over the flat background
    // against direct curvature of the warped metric.
    let dim = 3usize;
    let mut gaps = Vec::with_capacity(study.grids.len());
    for &nodes in &study.grids {
        let flat = Manifold::flat_torus(dim, nodes);
        let geo_flat = base_geometry::<f64>(&flat)?;
        let u = ConformalFactor::from_field(study.phi.realize::<f64>(&geo_flat.grid)?)?;
        let formula = conformal_modified_schouten(&geo_flat, &u, study.tau, study.alpha)?;
        let warped = curvature::<f64>(&Manifold::conformal_torus(dim, nodes, study.phi.clone()))?;
        let direct = warped.modified_schouten(study.tau, study.alpha);
        gaps.push(formula.max_abs_diff(&direct));
    }
    let mut orders = Vec::new();
    for w in 0..gaps.len() - 1 {
        let ratio = study.grids[w + 1] as f64 / study.grids[w] as f64;
        orders.push((gaps[w] / gaps[w + 1]).ln() / ratio.ln());
    }
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);

    let payload = Payload {
        tol,
        order_floor: ORDER_FLOOR,
        manifold,
        tau: cfg.tau,
        alpha: cfg.alpha,
        trace_identity: TraceBlock {
            sizes,
            pairs,
            trials_per_case: trials,
            max_gap: max_trace_gap,
        },
        additivity: GapBlock { max_gap: additivity },
        exp_height: GapBlock { max_gap: exp_height },
        reduction_vs_conformal: GapBlock { max_gap: reduction_vs_conformal },
        order_study: OrderBlock {
            grids: study.grids.clone(),
            gaps: gaps.clone(),
            observed_orders: orders.clone(),
            min_order,
        },
    };
    sink.put_json("identities.json", &Artifact::new("verify-identities", loaded.seed, &payload))?;

    let mut csv = csv::WriterBuilder::new().from_writer(Vec::new());
    csv.write_record(["identity", "max_gap", "tol"])?;
    for (name, gap) in [
        ("trace_identity", max_trace_gap),
        ("additivity", additivity),
        ("exp_height", exp_height),
        ("reduction_vs_conformal", reduction_vs_conformal),
    ] {
        csv.write_record([name.to_string(), format!("{gap:.6e}"), format!("{tol:.1e}")])?;
    }
    let bytes = csv.into_inner().map_err(|e| crate::RunError::config(e.to_string()))?;
    sink.put_bytes("residuals.csv", &bytes)?;

    let mut problems = Vec::new();
    for (name, gap) in [
        ("trace_identity", max_trace_gap),
        ("additivity", additivity),
        ("exp_height", exp_height),
        ("reduction_vs_conformal", reduction_vs_conformal),
    ] {
        if !(gap <= tol) {
            problems.push(format!("{name} residual {gap:.3e} above {tol:.1e}"));
        }
    }
    if !(min_order >= ORDER_FLOOR) {
        problems.push(format!("refinement order {min_order:.2} below {ORDER_FLOOR}"));
    }

    if problems.is_empty() {
        Ok(CommandOutcome::ok(format!(
            "identities at round-off (worst {:.2e}), refinement order {:.2}",
            max_trace_gap.max(additivity).max(exp_height).max(reduction_vs_conformal),
            min_order
        )))
    } else {
        Ok(CommandOutcome { exit: EXIT_VIOLATION, headline: problems.join("; ") })
    }
}
