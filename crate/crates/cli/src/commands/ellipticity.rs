//! `ellipticity`: sampled certificates for the configured operator roster,
//! a shift sweep, and the exact-ratio gradient spot check.

use ccl_core::cones::invariants::compute_theta;
use ccl_core::symfunc::certify::{
    certify_full_ellipticity, certify_partial_ellipticity, rho_sweep,
};
use ccl_core::{EllipticityCertificate, SymmetricFunctionSpec, TransformedOperator};
use serde::Serialize;

use crate::config::{decode, EllipticityCfg, EllipticityItem, Loaded, SweepCfg};
use crate::manifest::Sink;
use crate::{CommandOutcome, RunResult, EXIT_VIOLATION};

use super::{item_seed, map_indexed, Artifact};

const GRADIENT_RATIO_TOL: f64 = 1e-9;

#[derive(Serialize)]
struct CertRow {
    name: String,
    f: SymmetricFunctionSpec,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    /// Certified bound fed to the partial inequalities.
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_lower: Option<f64>,
    seed: u64,
    cert: EllipticityCertificate,
}

#[derive(Serialize)]
struct SweepOut {
    f: SymmetricFunctionSpec,
    rhos: Vec<f64>,
    theta_floors: Vec<f64>,
    ratio_first_to_last: f64,
}

#[derive(Serialize)]
struct GradientRatio {
    n: usize,
    t: f64,
    ratio: f64,
    expected: f64,
    gap: f64,
}

#[derive(Serialize)]
struct Payload {
    samples: usize,
    certificates: Vec<CertRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepOut>,
    gradient_ratios: Vec<GradientRatio>,
    violations: usize,
}

/// Builtin roster: for every sigma_k^{1/k} with 3 <= n <= 6, the partial
/// certificate on its own cone, plus full certificates at a negative shift
/// and at half the cone scale.
fn builtin_items() -> Vec<EllipticityItem> {
    let mut items = Vec::new();
    for n in 3..=6usize {
        for k in 1..=n {
            let f = SymmetricFunctionSpec::sigma_k_root(n, k);
            items.push(EllipticityItem {
                name: format!("sigma{k}root_n{n}_partial"),
                f: f.clone(),
                rho: None,
            });
            let scale = n as f64 / k as f64;
            items.push(EllipticityItem {
                name: format!("sigma{k}root_n{n}_rho_m1"),
                f: f.clone(),
                rho: Some(-1.0),
            });
            items.push(EllipticityItem {
                name: format!("sigma{k}root_n{n}_rho_half"),
                f,
                rho: Some(scale / 2.0),
            });
        }
    }
    items
}

fn builtin_sweep() -> SweepCfg {
    SweepCfg {
        f: SymmetricFunctionSpec::sigma_k_root(4, 2),
        rhos: vec![1.0, 1.2, 1.4, 1.6, 1.8, 1.9, 1.95, 1.99],
    }
}

pub fn run(loaded: &Loaded, sink: &mut Sink, threads: usize) -> RunResult<CommandOutcome> {
    let cfg: EllipticityCfg = decode(loaded)?;
    let samples = cfg.samples.unwrap_or(10_000);
    if samples == 0 {
        return Err(crate::RunError::config("samples must be positive"));
    }
    let items = cfg.functions.clone().unwrap_or_else(builtin_items);
    if items.is_empty() {
        return Err(crate::RunError::config("empty certificate roster"));
    }
    for item in &items {
        item.f.validate()?;
    }
    let budget = cfg.theta.budget;

    let certs = map_indexed(threads, &items, |i, item| -> RunResult<CertRow> {
        let seed = item_seed(loaded.seed, i);
        match item.rho {
            Some(rho) => {
                let op = TransformedOperator::new(item.f.clone(), rho)?;
                let cert = certify_full_ellipticity(&op, samples, seed)?;
                Ok(CertRow {
                    name: item.name.clone(),
                    f: item.f.clone(),
                    kind: "full",
                    rho: Some(rho),
                    theta_lower: None,
                    seed,
                    cert,
                })
            }
            None => {
                let (theta_lower, _) = compute_theta(item.f.cone(), seed, budget)?;
                let cert = certify_partial_ellipticity(&item.f, theta_lower, samples, seed)?;
                Ok(CertRow {
                    name: item.name.clone(),
                    f: item.f.clone(),
                    kind: "partial",
                    rho: None,
                    theta_lower: Some(theta_lower),
                    seed,
                    cert,
                })
            }
        }
    });
    let mut rows = Vec::with_capacity(certs.len());
    for c in certs {
        rows.push(c?);
    }

    let sweep_cfg = cfg.sweep.clone().unwrap_or_else(builtin_sweep);
    let sweep = if sweep_cfg.rhos.is_empty() {
        None
    } else {
        let pts = rho_sweep(&sweep_cfg.f, &sweep_cfg.rhos, samples, loaded.seed)?;
        let thetas: Vec<f64> = pts.iter().map(|&(_, th)| th).collect();
        let ratio = thetas[0] / thetas[thetas.len() - 1].max(f64::MIN_POSITIVE);
        Some(SweepOut {
            f: sweep_cfg.f.clone(),
            rhos: pts.iter().map(|&(r, _)| r).collect(),
            theta_floors: thetas,
            ratio_first_to_last: ratio,
        })
    };

    let mut gradient_ratios = Vec::new();
    if cfg.gradient_ratio_check {
        for n in [4usize, 6] {
            let f = SymmetricFunctionSpec::sigma_k_root(n, n);
            for t in [1.5, 2.0, 3.7] {
                let mut lam = vec![1.0; n];
                lam[0] = t;
                let (_, grad) = f.eval_grad(&lam)?;
                let ratio = grad[0] / grad[1];
                let expected = 1.0 / t;
                gradient_ratios.push(GradientRatio {
                    n,
                    t,
                    ratio,
                    expected,
                    gap: (ratio - expected).abs(),
                });
            }
        }
    }

    let mut violations = 0usize;
    for row in &rows {
        violations += row.cert.violations;
    }
    let mut problems: Vec<String> = rows
        .iter()
        .filter(|r| r.cert.violations > 0)
        .map(|r| format!("{}: {} violations", r.name, r.cert.violations))
        .collect();
    if let Some(sw) = &sweep {
        if sw.theta_floors.iter().any(|&th| !(th > 0.0)) {
            problems.push("sweep hit a nonpositive theta floor".to_string());
        }
    }
    for gr in &gradient_ratios {
        if !(gr.gap <= GRADIENT_RATIO_TOL) {
            problems.push(format!(
                "gradient ratio at n = {}, t = {} off by {:.3e}",
                gr.n, gr.t, gr.gap
            ));
        }
    }

    let payload = Payload {
        samples,
        certificates: rows,
        sweep,
        gradient_ratios,
        violations,
    };

    let mut csv = csv::WriterBuilder::new().from_writer(Vec::new());
    csv.write_record([
        "name", "kind", "rho", "theta_floor", "min_grad", "worst_margin", "violations", "samples",
    ])?;
    for row in &payload.certificates {
        csv.write_record([
            row.name.clone(),
            row.kind.to_string(),
            row.rho.map_or_else(String::new, |r| format!("{r}")),
            format!("{:.12e}", row.cert.theta_floor),
            format!("{:.12e}", row.cert.min_grad),
            format!("{:.12e}", row.cert.worst_margin),
            row.cert.violations.to_string(),
            row.cert.samples.to_string(),
        ])?;
    }
    let bytes = csv.into_inner().map_err(|e| crate::RunError::config(e.to_string()))?;
    sink.put_bytes("certificates.csv", &bytes)?;

    if let Some(sw) = &payload.sweep {
        let mut csv = csv::WriterBuilder::new().from_writer(Vec::new());
        csv.write_record(["rho", "theta_floor"])?;
        for (r, th) in sw.rhos.iter().zip(&sw.theta_floors) {
            csv.write_record([format!("{r}"), format!("{th:.12e}")])?;
        }
        let bytes = csv.into_inner().map_err(|e| crate::RunError::config(e.to_string()))?;
        sink.put_bytes("sweep.csv", &bytes)?;
    }
    sink.put_json("ellipticity.json", &Artifact::new("ellipticity", loaded.seed, &payload))?;

    if problems.is_empty() {
        Ok(CommandOutcome::ok(format!(
            "{} certificates clean over {samples} samples",
            payload.certificates.len()
        )))
    } else {
        Ok(CommandOutcome {
            exit: EXIT_VIOLATION,
            headline: problems.join("; "),
        })
    }
}
