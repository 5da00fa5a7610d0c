//! `suite`: the full battery under one output tree and one manifest, with a
//! summary table. Items are positive checks plus negative controls whose
//! expected outcome is a reported finding, so a clean run exits zero.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, decode, Command, Loaded, SuiteCfg};
use crate::manifest::Sink;
use crate::{CommandOutcome, RunError, RunResult, EXIT_FINDING, EXIT_OK, EXIT_VIOLATION};

use super::{dispatch, item_seed, Artifact};

struct SuiteItem {
    name: &'static str,
    command: Command,
    cfg: Value,
    expect_exit: i32,
}

#[derive(Serialize)]
struct Row {
    item: String,
    command: String,
    expected_exit: i32,
    exit: i32,
    ok: bool,
    headline: String,
}

#[derive(Serialize)]
struct Payload {
    profile: String,
    rows: Vec<Row>,
}

fn cone_report_cfg(theta_budget: usize) -> Value {
    json!({
        "schema": crate::SCHEMA,
        "command": "cone-report",
        "theta": { "budget": theta_budget }
    })
}

fn ellipticity_cfg(samples: usize, theta_budget: usize) -> Value {
    json!({
        "schema": crate::SCHEMA,
        "command": "ellipticity",
        "samples": samples,
        "theta": { "budget": theta_budget }
    })
}

fn identities_cfg(smoke: bool) -> Value {
    if smoke {
        json!({
            "schema": crate::SCHEMA,
            "command": "verify-identities",
            "manifold": {
                "kind": "conformal_torus",
                "n": 3,
                "grid": [8],
                "phi": { "kind": "sum", "terms": [
                    { "kind": "cos_product", "amplitude": 0.07,
                      "factors": [{ "axis": 0, "freq": 1.0, "phase": 0.1 - FRAC_PI_2 }] },
                    { "kind": "cos_product", "amplitude": 0.05,
                      "factors": [{ "axis": 1, "freq": 1.0, "phase": 0.0 }] }
                ]}
            },
            "trials": 32,
            "order_study": {
                "phi": { "kind": "sum", "terms": [
                    { "kind": "cos_product", "amplitude": 0.08,
                      "factors": [{ "axis": 0, "freq": 1.0, "phase": -FRAC_PI_2 }] },
                    { "kind": "cos_product", "amplitude": 0.06,
                      "factors": [{ "axis": 2, "freq": 1.0, "phase": 0.3 }] }
                ]},
                "grids": [12, 16],
                "tau": 3.0,
                "alpha": 1.0
            }
        })
    } else {
        json!({ "schema": crate::SCHEMA, "command": "verify-identities" })
    }
}

fn construct_slab_cfg() -> Value {
    json!({
        "schema": crate::SCHEMA,
        "command": "construct",
        "manifold": { "kind": "slab", "n": 4, "grid": [5, 8, 8, 8] },
        "cone": { "kind": "garding", "n": 4, "k": 1 },
        "tau": 3.0,
        "alpha": 1.0,
        "height": { "kind": "linear_axis", "axis": 0, "slope": 1.0, "offset": -2.0 },
        "n_max": 1024.0
    })
}

fn construct_flat_torus_cfg(nodes: usize) -> Value {
    json!({
        "schema": crate::SCHEMA,
        "command": "construct",
        "manifold": { "kind": "flat_torus", "n": 3, "grid": [nodes] },
        "cone": { "kind": "garding", "n": 3, "k": 1 },
        "tau": 3.0,
        "alpha": 1.0,
        "height": {
            "kind": "warped_wells",
            "center": [2.0, 2.0, 2.0],
            "kappa": 2.0,
            "amplitude": 0.15,
            "offset": -1.6,
            "gamma": FRAC_PI_2
        },
        "n_max": 64.0
    })
}

/// Smooth manufactured target on the flat torus. The trace family evaluates
/// everywhere, so the solve converges, but no smooth low-amplitude field can
/// keep the torus inside the cone (the conformal scalar curvature integral
/// has a sign), so the interior check reports a finding by design.
fn solve_sigma1_smooth_cfg(nodes: usize) -> Value {
    json!({
        "schema": crate::SCHEMA,
        "command": "solve",
        "problem": {
            "manifold": { "kind": "flat_torus", "n": 3, "grid": [nodes] },
            "f": { "family": "sigma1", "cone": { "kind": "garding", "n": 3, "k": 1 } },
            "tau": 1.0,
            "alpha": -1.0,
            "psi": { "kind": "manufactured_discrete", "u_star": { "kind": "sum", "terms": [
                { "kind": "cos_product", "amplitude": 0.1,
                  "factors": [{ "axis": 0, "freq": 1.0, "phase": -FRAC_PI_2 }] },
                { "kind": "cos_product", "amplitude": 0.05, "factors": [
                    { "axis": 1, "freq": 1.0, "phase": 0.0 },
                    { "axis": 2, "freq": 1.0, "phase": 0.0 }
                ]}
            ]}}
        },
        "init": { "kind": "target_offset", "spec": { "kind": "sum", "terms": [
            { "kind": "constant", "value": 0.2 },
            { "kind": "cos_product", "amplitude": 0.3, "factors": [
                { "axis": 0, "freq": 1.0, "phase": 0.7 - FRAC_PI_2 },
                { "axis": 1, "freq": 1.0, "phase": 0.0 }
            ]}
        ]}}
    })
}

/// A steep profile whose discrete gradient at the transition keeps every
/// node strictly inside the cone at exactly 16 nodes per axis, giving a
/// positive recovery run with all iterates interior.
fn solve_sigma1_kink_cfg() -> Value {
    let shift = std::f64::consts::PI / 16.0;
    json!({
        "schema": crate::SCHEMA,
        "command": "solve",
        "problem": {
            "manifold": { "kind": "flat_torus", "n": 3, "grid": [16] },
            "f": { "family": "sigma1", "cone": { "kind": "garding", "n": 3, "k": 1 } },
            "tau": 1.0,
            "alpha": -1.0,
            "psi": { "kind": "manufactured_discrete", "u_star": { "kind": "sum", "terms": [
                { "kind": "kink_profile", "axis": 0, "kappa": 256.0,
                  "amplitude": 2.4, "shift": shift },
                { "kind": "cos_product", "amplitude": 0.05,
                  "factors": [{ "axis": 1, "freq": 1.0, "phase": 0.0 }] },
                { "kind": "cos_product", "amplitude": 0.05,
                  "factors": [{ "axis": 2, "freq": 1.0, "phase": 0.0 }] }
            ]}}
        },
        "init": { "kind": "target_offset", "spec": { "kind": "sum", "terms": [
            { "kind": "cos_product", "amplitude": 0.03, "factors": [
                { "axis": 1, "freq": 1.0, "phase": 0.0 },
                { "axis": 2, "freq": 1.0, "phase": 0.0 }
            ]},
            { "kind": "cos_product", "amplitude": 0.02,
              "factors": [{ "axis": 2, "freq": 2.0, "phase": 0.5 }] }
        ]}}
    })
}

fn solve_sigma2root_slab_cfg() -> Value {
    json!({
        "schema": crate::SCHEMA,
        "command": "solve",
        "problem": {
            "manifold": { "kind": "slab", "n": 4, "grid": [9, 8, 8, 8] },
            "f": { "family": "sigma_k_root", "k": 2,
                   "cone": { "kind": "garding", "n": 4, "k": 2 } },
            "tau": 2.5,
            "alpha": 1.0,
            "psi": { "kind": "manufactured_discrete", "u_star": { "kind": "sum", "terms": [
                { "kind": "linear_axis", "axis": 0, "slope": 1.0, "offset": 0.0 },
                { "kind": "cos_product", "amplitude": 0.05,
                  "factors": [{ "axis": 1, "freq": 1.0, "phase": -FRAC_PI_2 }] },
                { "kind": "cos_product", "amplitude": 0.04,
                  "factors": [{ "axis": 2, "freq": 1.0, "phase": 0.0 }] },
                { "kind": "cos_product", "amplitude": 0.02,
                  "factors": [{ "axis": 3, "freq": 1.0, "phase": 0.3 - FRAC_PI_2 }] },
                { "kind": "cos_product", "amplitude": 0.03,
                  "factors": [{ "axis": 0, "freq": 2.0, "phase": -FRAC_PI_2 }] }
            ]}}
        },
        "newton": { "theta_reference": { "kind": "certified", "budget": 20000 } },
        "init": { "kind": "target_offset", "spec": { "kind": "sum", "terms": [
            { "kind": "cos_product", "amplitude": 0.03, "factors": [
                { "axis": 0, "freq": 1.0, "phase": -FRAC_PI_2 },
                { "axis": 1, "freq": 1.0, "phase": 0.0 }
            ]},
            { "kind": "cos_product", "amplitude": 0.015, "factors": [
                { "axis": 0, "freq": 1.0, "phase": -FRAC_PI_2 },
                { "axis": 3, "freq": 1.0, "phase": -FRAC_PI_2 }
            ]}
        ]}}
    })
}

fn solve_radial_cfg(stages: &[usize]) -> Value {
    json!({
        "schema": crate::SCHEMA,
        "command": "solve",
        "problem": {
            "manifold": { "kind": "radial_ball", "n": 4, "grid": [8] },
            "f": { "family": "sigma1", "cone": { "kind": "garding", "n": 4, "k": 1 } },
            "tau": 1.0,
            "alpha": -1.0,
            "psi": { "kind": "constant", "value": 2.0 }
        },
        "radial": { "stages": stages }
    })
}

fn full_profile() -> Vec<SuiteItem> {
    vec![
        SuiteItem {
            name: "cone_report",
            command: Command::ConeReport,
            cfg: cone_report_cfg(6_000),
            expect_exit: EXIT_OK,
        },
        SuiteItem {
            name: "ellipticity",
            command: Command::Ellipticity,
            cfg: ellipticity_cfg(10_000, 6_000),
            expect_exit: EXIT_OK,
        },
        SuiteItem {
            name: "identities",
            command: Command::VerifyIdentities,
            cfg: identities_cfg(false),
            expect_exit: EXIT_OK,
        },
        SuiteItem {
            name: "construct_slab",
            command: Command::Construct,
            cfg: construct_slab_cfg(),
            expect_exit: EXIT_OK,
        },
        SuiteItem {
            name: "construct_flat_torus",
            command: Command::Construct,
            cfg: construct_flat_torus_cfg(20),
            expect_exit: EXIT_FINDING,
        },
        SuiteItem {
            name: "solve_sigma1_smooth",
            command: Command::Solve,
            cfg: solve_sigma1_smooth_cfg(16),
            expect_exit: EXIT_FINDING,
        },
        SuiteItem {
            name: "solve_sigma1_kink",
            command: Command::Solve,
            cfg: solve_sigma1_kink_cfg(),
            expect_exit: EXIT_OK,
        },
        SuiteItem {
            name: "solve_sigma2root_slab",
            command: Command::Solve,
            cfg: solve_sigma2root_slab_cfg(),
            expect_exit: EXIT_OK,
        },
        SuiteItem {
            name: "solve_radial",
            command: Command::Solve,
            cfg: solve_radial_cfg(&[76, 98, 121, 144, 167, 190]),
            expect_exit: EXIT_OK,
        },
    ]
}

fn smoke_profile() -> Vec<SuiteItem> {
    vec![
        SuiteItem {
            name: "cone_report",
            command: Command::ConeReport,
            cfg: cone_report_cfg(1_200),
            expect_exit: EXIT_OK,
        },
        SuiteItem {
            name: "ellipticity",
            command: Command::Ellipticity,
            cfg: ellipticity_cfg(1_200, 800),
            expect_exit: EXIT_OK,
        },
        SuiteItem {
            name: "identities",
            command: Command::VerifyIdentities,
            cfg: identities_cfg(true),
            expect_exit: EXIT_OK,
        },
        SuiteItem {
            name: "construct_slab",
            command: Command::Construct,
            cfg: construct_slab_cfg(),
            expect_exit: EXIT_OK,
        },
        SuiteItem {
            name: "construct_flat_torus",
            command: Command::Construct,
            cfg: construct_flat_torus_cfg(12),
            expect_exit: EXIT_FINDING,
        },
        SuiteItem {
            name: "solve_sigma1_smooth",
            command: Command::Solve,
            cfg: solve_sigma1_smooth_cfg(10),
            expect_exit: EXIT_FINDING,
        },
        SuiteItem {
            name: "solve_sigma1_kink",
            command: Command::Solve,
            cfg: solve_sigma1_kink_cfg(),
            expect_exit: EXIT_OK,
        },
        SuiteItem {
            name: "solve_radial",
            command: Command::Solve,
            cfg: solve_radial_cfg(&[40, 60]),
            expect_exit: EXIT_OK,
        },
    ]
}

pub fn run(loaded: &Loaded, sink: &mut Sink, threads: usize) -> RunResult<CommandOutcome> {
    let cfg: SuiteCfg = decode(loaded)?;
    let items = match cfg.profile.as_str() {
        "full" => full_profile(),
        "smoke" => smoke_profile(),
        other => {
            return Err(RunError::config(format!(
                "unknown suite profile {other:?}; use \"full\" or \"smoke\""
            )))
        }
    };

    let mut rows = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let sub = config::load_value(
            item.cfg.clone(),
            item.command,
            Some(item_seed(loaded.seed, i)),
            loaded.tol,
        )?;
        let mut sub_sink = Sink::new(&sink.path(item.name))?;
        let (exit, headline) = match dispatch(item.command, &sub, &mut sub_sink, threads) {
            Ok(outcome) => (outcome.exit, outcome.headline),
            Err(e) => (e.exit, e.message),
        };
        sink.absorb(item.name, sub_sink);
        rows.push(Row {
            item: item.name.to_string(),
            command: item.command.name().to_string(),
            expected_exit: item.expect_exit,
            exit,
            ok: exit == item.expect_exit,
            headline,
        });
    }

    let mut csv = csv::WriterBuilder::new().from_writer(Vec::new());
    csv.write_record(["item", "command", "expected_exit", "exit", "ok", "headline"])?;
    for row in &rows {
        csv.write_record([
            row.item.clone(),
            row.command.clone(),
            row.expected_exit.to_string(),
            row.exit.to_string(),
            row.ok.to_string(),
            row.headline.clone(),
        ])?;
    }
    let bytes = csv.into_inner().map_err(|e| RunError::config(e.to_string()))?;
    sink.put_bytes("summary.csv", &bytes)?;
    let payload = Payload { profile: cfg.profile.clone(), rows };
    sink.put_json("summary.json", &Artifact::new("suite", loaded.seed, &payload))?;

    let bad: Vec<&Row> = payload.rows.iter().filter(|r| !r.ok).collect();
    if bad.is_empty() {
        Ok(CommandOutcome::ok(format!(
            "{} items behaved as expected ({} profile)",
            payload.rows.len(),
            payload.profile
        )))
    } else {
        let exit = bad
            .iter()
            .map(|r| if r.exit == EXIT_OK { EXIT_VIOLATION } else { r.exit })
            .max()
            .unwrap_or(EXIT_VIOLATION);
        Ok(CommandOutcome {
            exit,
            headline: format!(
                "{} of {} items off expectation: {}",
                bad.len(),
                payload.rows.len(),
                bad.iter().map(|r| r.item.as_str()).collect::<Vec<_>>().join(", ")
            ),
        })
    }
}
