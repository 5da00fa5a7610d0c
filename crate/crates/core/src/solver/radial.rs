//! Radially symmetric blow-up continuation on the unit ball for the trace
//! family: solve u'' + (n-1)u'/r + (n-2)u'^2/2 = q e^{2u} on r <= 1-eps
//! with the hyperbolic boundary value, shrinking eps geometrically. The
//! trace family is the only one wired to this path: it is invariant under
//! the trace-preserving cone map, so a single scalar prefactor covers every
//! parameter choice that passes the gates.

use serde::Serialize;

use crate::error::{CclError, Result};
use crate::linalg::thomas_solve;
use crate::scalar::{c, lower, Scalar};

#[derive(Clone, Debug)]
pub struct RadialOptions {
    /// Geometric mesh r_k = 1 - mesh_ratio^k; keeps step/(1-r) fixed, which
    /// balances the stencil error against the curvature of the profile.
    pub mesh_ratio: f64,
    /// Node counts of the continuation stages; stage j solves on
    /// r <= 1 - mesh_ratio^{stages[j]}. Consecutive entries roughly halve
    /// the truncation eps.
    pub stages: Vec<usize>,
    /// Constant multiplying the density (1 on the direct path).
    pub prefactor: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub max_halvings: u32,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions {
            mesh_ratio: 0.97,
            stages: vec![76, 98, 121, 144, 167, 190],
            prefactor: 1.0,
            tol: 1e-12,
            max_iters: 40,
            max_halvings: 30,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RadialStage {
    pub nodes: usize,
    pub epsilon: f64,
    pub radius: f64,
    pub boundary_value: f64,
    pub iterations: usize,
    pub residual_sup: f64,
    /// min over the shared nodes of (this stage - previous stage); the
    /// continuation must not dip below -1e-10.
    pub prefix_min_gap: Option<f64>,
    /// sup over r <= 0.9 of |this stage - previous stage|.
    pub inner_shift: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RadialRun {
    pub n: usize,
    pub psi: f64,
    pub prefactor: f64,
    pub mesh_ratio: f64,
    /// u_ref(r) = log(2/(1-r^2)) - reference_shift.
    pub reference_shift: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub stages: Vec<RadialStage>,
    /// sup over r <= 0.9 of |u - u_ref| at the final stage.
    pub sup_err_inner: f64,
    pub monotone_min_gap: f64,
}

pub const MONOTONE_TOL: f64 = 1e-10;

/// Continuation solve; aborts with a named violation if any stage dips
/// below the previous one by more than the monotonicity tolerance.
pub fn solve_radial<F: Scalar>(n: usize, psi: f64, opts: &RadialOptions) -> Result<RadialRun> {
    if n < 3 {
        return Err(CclError::InvalidProblem(format!("radial path needs n >= 3, got {n}")));
    }
    if !(psi > 0.0) || !(opts.prefactor > 0.0) {
        return Err(CclError::InvalidProblem(format!(
            "density {psi} and prefactor {} must be positive",
            opts.prefactor
        )));
    }
    if !(opts.mesh_ratio > 0.0 && opts.mesh_ratio < 1.0) {
        return Err(CclError::InvalidProblem(format!(
            "mesh ratio must sit in (0,1), got {}",
            opts.mesh_ratio
        )));
    }
    if opts.stages.is_empty() || opts.stages.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CclError::InvalidProblem("stages must be strictly increasing".into()));
    }
    if opts.stages[0] < 4 {
        return Err(CclError::GridTooCoarse("first stage needs at least 4 layers".into()));
    }
    let q = opts.prefactor * psi;
    // q e^{2u_ref} matches the trace of the model profile when the shift
    // absorbs q/(n/2).
    let shift = 0.5 * (q / (n as f64 / 2.0)).ln();
    let reference = |r: f64| (2.0 / (1.0 - r * r)).ln() - shift;

    let k_max = *opts.stages.last().unwrap();
    let r_full: Vec<f64> = (0..=k_max).map(|k| 1.0 - opts.mesh_ratio.powi(k as i32)).collect();
    let rf: Vec<F> = r_full.iter().map(|&r| c(r)).collect();
    let qf = c::<F>(q);

    let mut stages: Vec<RadialStage> = Vec::new();
    let mut prev: Option<(usize, Vec<F>)> = None;
    let mut monotone_min_gap = f64::INFINITY;
    for &k_end in &opts.stages {
        let radius = r_full[k_end];
        let epsilon = opts.mesh_ratio.powi(k_end as i32);
        let bval = reference(radius);
        let mut u: Vec<F> = match &prev {
            None => (0..=k_end)
                .map(|k| c::<F>(bval * (r_full[k] / radius).powi(2)))
                .collect(),
            Some((k_prev, up)) => {
                let mut u = up.clone();
                let r0 = r_full[*k_prev];
                let v0 = lower(up[*k_prev]);
                for k in *k_prev + 1..=k_end {
                    let t = (r_full[k] - r0) / (radius - r0);
                    u.push(c::<F>(v0 + t * (bval - v0)));
                }
                u
            }
        };
        let (iterations, residual_sup) =
            newton_stage(n, qf, &rf[..=k_end], &mut u, c::<F>(bval), opts)?;

        let (mut prefix_min_gap, mut inner_shift) = (None, None);
        if let Some((k_prev, up)) = &prev {
            let mut gap = f64::INFINITY;
            let mut shift_inner = 0.0f64;
            for k in 0..=*k_prev {
                let d = lower(u[k] - up[k]);
                gap = gap.min(d);
                if r_full[k] <= 0.9 {
                    shift_inner = shift_inner.max(d.abs());
                }
            }
            if gap < -MONOTONE_TOL {
                return Err(CclError::NonMonotoneContinuation(format!(
                    "stage with {} layers dips {gap:.3e} below the previous profile",
                    k_end
                )));
            }
            monotone_min_gap = monotone_min_gap.min(gap);
            prefix_min_gap = Some(gap);
            inner_shift = Some(shift_inner);
        }
        stages.push(RadialStage {
            nodes: k_end + 1,
            epsilon,
            radius,
            boundary_value: bval,
            iterations,
            residual_sup,
            prefix_min_gap,
            inner_shift,
        });
        prev = Some((k_end, u));
    }

    let (k_end, u) = prev.unwrap();
    let mut sup_err_inner = 0.0f64;
    for k in 0..=k_end {
        if r_full[k] <= 0.9 {
            sup_err_inner = sup_err_inner.max((lower(u[k]) - reference(r_full[k])).abs());
        }
    }
    Ok(RadialRun {
        n,
        psi,
        prefactor: opts.prefactor,
        mesh_ratio: opts.mesh_ratio,
        reference_shift: shift,
        r: r_full[..=k_end].to_vec(),
        u: u.iter().map(|&v| lower(v)).collect(),
        stages,
        sup_err_inner,
        monotone_min_gap: if monotone_min_gap.is_finite() { monotone_min_gap } else { 0.0 },
    })
}

/// Damped Newton on one truncated domain; tridiagonal direct solves.
fn newton_stage<F: Scalar>(
    n: usize,
    q: F,
    r: &[F],
    u: &mut Vec<F>,
    bval: F,
    opts: &RadialOptions,
) -> Result<(usize, f64)> {
    let k_end = r.len() - 1;
    let mut res = vec![F::zero(); k_end + 1];
    let (mut sup, mut rhs_sup) = residual(n, q, r, u, bval, &mut res);
    for it in 0..opts.max_iters {
        if sup <= opts.tol * (1.0 + rhs_sup) {
            return Ok((it, sup));
        }
        let (sub, diag, sup_band) = jacobian(n, q, r, u);
        let mut delta: Vec<F> = res.iter().map(|&v| -v).collect();
        thomas_solve(&sub, &diag, &sup_band, &mut delta)?;
        let mut t = 1.0f64;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let tf = c::<F>(t);
            let trial: Vec<F> = (0..=k_end).map(|k| u[k] + tf * delta[k]).collect();
            let mut tres = vec![F::zero(); k_end + 1];
            let (tsup, trhs) = residual(n, q, r, &trial, bval, &mut tres);
            if tsup.is_finite() && tsup <= (1.0 - 1e-4 * t) * sup {
                *u = trial;
                res = tres;
                sup = tsup;
                rhs_sup = trhs;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(CclError::DampingFloor);
        }
    }
    if sup <= opts.tol * (1.0 + rhs_sup) {
        return Ok((opts.max_iters, sup));
    }
    Err(CclError::MaxIterations(opts.max_iters))
}

fn residual<F: Scalar>(
    n: usize,
    q: F,
    r: &[F],
    u: &[F],
    bval: F,
    out: &mut [F],
) -> (f64, f64) {
    let k_end = r.len() - 1;
    let two = c::<F>(2.0);
    let nf = c::<F>(n as f64);
    let n1 = c::<F>((n - 1) as f64);
    let half_n2 = c::<F>((n - 2) as f64 / 2.0);
    let mut sup = 0.0f64;
    let mut rhs_sup = 0.0f64;
    let h1 = r[1] - r[0];
    let rhs0 = q * (two * u[0]).exp();
    out[0] = two * nf * (u[1] - u[0]) / (h1 * h1) - rhs0;
    sup = sup.max(lower(out[0].abs()));
    rhs_sup = rhs_sup.max(lower(rhs0));
    for k in 1..k_end {
        let a = r[k] - r[k - 1];
        let b = r[k + 1] - r[k];
        let d2 = two * (u[k - 1] / (a * (a + b)) - u[k] / (a * b) + u[k + 1] / (b * (a + b)));
        let d1 = a / (b * (a + b)) * u[k + 1] + (b - a) / (a * b) * u[k]
            - b / (a * (a + b)) * u[k - 1];
        let rhs = q * (two * u[k]).exp();
        out[k] = d2 + n1 * d1 / r[k] + half_n2 * d1 * d1 - rhs;
        sup = sup.max(lower(out[k].abs()));
        rhs_sup = rhs_sup.max(lower(rhs));
    }
    out[k_end] = u[k_end] - bval;
    sup = sup.max(lower(out[k_end].abs()));
    (sup, rhs_sup)
}

fn jacobian<F: Scalar>(n: usize, q: F, r: &[F], u: &[F]) -> (Vec<F>, Vec<F>, Vec<F>) {
    let k_end = r.len() - 1;
    let two = c::<F>(2.0);
    let nf = c::<F>(n as f64);
    let n1 = c::<F>((n - 1) as f64);
    let n2 = c::<F>((n - 2) as f64);
    let mut sub = vec![F::zero(); k_end + 1];
    let mut diag = vec![F::zero(); k_end + 1];
    let mut sup = vec![F::zero(); k_end + 1];
    let h1 = r[1] - r[0];
    diag[0] = -two * nf / (h1 * h1) - two * q * (two * u[0]).exp();
    sup[0] = two * nf / (h1 * h1);
    for k in 1..k_end {
        let a = r[k] - r[k - 1];
        let b = r[k + 1] - r[k];
        let ca = a / (b * (a + b));
        let cb = (b - a) / (a * b);
        let cc = -b / (a * (a + b));
        let d1 = ca * u[k + 1] + cb * u[k] + cc * u[k - 1];
        let transport = n1 / r[k] + n2 * d1;
        sub[k] = two / (a * (a + b)) + transport * cc;
        diag[k] = -two / (a * b) + transport * cb - two * q * (two * u[k]).exp();
        sup[k] = two / (b * (a + b)) + transport * ca;
    }
    sub[k_end] = F::zero();
    diag[k_end] = F::one();
    (sub, diag, sup)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_matches_the_closed_form_on_the_inner_ball() {
        for n in [3usize, 4] {
            let psi = n as f64 / 2.0;
            let run = solve_radial::<f64>(n, psi, &RadialOptions::default()).unwrap();
            assert!(run.sup_err_inner <= 1e-3, "n={n}: {}", run.sup_err_inner);
            assert!(run.monotone_min_gap >= -MONOTONE_TOL, "n={n}: {}", run.monotone_min_gap);
            for s in &run.stages {
                assert!(s.iterations <= 30, "{s:?}");
            }
            // Late stages barely move the inner profile.
            let last = run.stages.last().unwrap();
            assert!(last.inner_shift.unwrap() <= 1e-5, "{:?}", last.inner_shift);
        }
    }

    #[test]
    fn density_scaling_shifts_the_profile_by_half_the_log() {
        let base = solve_radial::<f64>(3, 1.5, &RadialOptions::default()).unwrap();
        let scaled = solve_radial::<f64>(3, 6.0, &RadialOptions::default()).unwrap();
        let s = (4.0f64).ln() / 2.0;
        let mut worst = 0.0f64;
        for (a, b) in base.u.iter().zip(&scaled.u) {
            worst = worst.max((b - (a - s)).abs());
        }
        assert!(worst <= 1e-9, "{worst}");
    }

    #[test]
    fn bad_configurations_are_rejected() {
        let mut o = RadialOptions::default();
        o.mesh_ratio = 1.2;
        assert!(solve_radial::<f64>(3, 1.5, &o).is_err());
        let mut o = RadialOptions::default();
        o.stages = vec![80, 70];
        assert!(solve_radial::<f64>(3, 1.5, &o).is_err());
        assert!(solve_radial::<f64>(3, -1.0, &RadialOptions::default()).is_err());
        assert!(solve_radial::<f64>(2, 1.0, &RadialOptions::default()).is_err());
    }
}
