//! Sampled ellipticity certificates. Partial: the sorted-eigenvalue
//! gradient inequalities guaranteed up to index kappa+1, tested against a
//! supplied theta lower bound. Full: a positive floor on the normalized
//! least gradient share for the cone-transformed operator. Concavity is a
//! separate midpoint test.

use crate::cones::invariants::compute_kappa;
use crate::cones::sampling::{near_boundary_probes, sample_interior};
use crate::cones::ConeSpec;
use crate::error::{CclError, Result};
use crate::symfunc::transform::TransformedOperator;
use crate::symfunc::SymmetricFunctionSpec;
use serde::Serialize;

/// Probe offsets used near the boundary, largest to smallest.
pub const PROBE_DELTAS: [f64; 6] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 1e-4];

/// Evidence over a finite point family. `violations` counts points where a
/// claimed inequality failed; a certificate with violations never passes
/// silently, the caller must inspect it.
#[derive(Clone, Debug, Serialize)]
pub struct EllipticityCertificate {
    pub full: bool,
    /// Full: smallest observed min_i g_i / sum g. Partial: the supplied
    /// theta lower bound the inequalities were tested with.
    pub theta_floor: f64,
    pub min_grad: f64,
    /// Smallest slack, normalized by sum g, over every inequality tested.
    pub worst_margin: f64,
    pub worst_point: Vec<f64>,
    pub samples: usize,
    pub probes: usize,
    pub violations: usize,
}

/// Midpoint concavity evidence.
#[derive(Clone, Debug, Serialize)]
pub struct ConcavityReport {
    pub pairs: usize,
    pub violations: usize,
    pub worst_gap: f64,
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
}

/// Normalized smallest gradient share; None when the gradient sum is not
/// positive.
pub fn theta_of_grad(grad: &[f64]) -> Option<f64> {
    let sum: f64 = grad.iter().sum();
    if !(sum > 0.0) {
        return None;
    }
    let min = grad.iter().cloned().fold(f64::INFINITY, f64::min);
    Some(min / sum)
}

fn gather_points(domain: &ConeSpec, seed: u64, samples: usize) -> Result<Vec<Vec<f64>>> {
    let mut pts = sample_interior(domain, samples, seed, samples.max(8) * 4000)?;
    pts.extend(near_boundary_probes(domain, &PROBE_DELTAS)?);
    Ok(pts)
}

/// Check, at seeded interior samples plus boundary probes, that after
/// sorting lambda ascending the gradient satisfies g_i >= 0, sum g > 0,
/// n*g_1 >= sum g, and g_i >= n*theta*g_1 for every i up to kappa+1.
pub fn certify_partial_ellipticity(
    f: &SymmetricFunctionSpec,
    theta_lower: f64,
    samples: usize,
    seed: u64,
) -> Result<EllipticityCertificate> {
    f.validate()?;
    if !(theta_lower > 0.0) {
        return Err(CclError::InvalidCone(format!(
            "theta lower bound must be positive, got {theta_lower}"
        )));
    }
    let n = f.dimension();
    let kappa = compute_kappa(f.cone())?;
    let pts = gather_points(f.cone(), seed, samples)?;
    let probes = pts.len() - samples;
    let mut min_grad = f64::INFINITY;
    let mut worst_margin = f64::INFINITY;
    let mut worst_point = Vec::new();
    let mut violations = 0usize;
    for lam in &pts {
        let (_, g) = f.eval_grad(lam)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| lam[a].partial_cmp(&lam[b]).expect("finite"));
        let gs: Vec<f64> = order.iter().map(|&i| g[i]).collect();
        let sum: f64 = gs.iter().sum();
        let mut bad = false;
        for &gi in &gs {
            if gi < min_grad {
                min_grad = gi;
            }
            if gi < -1e-12 {
                bad = true;
            }
        }
        if !(sum > 0.0) {
            bad = true;
        } else {
            let head = n as f64 * theta_lower * gs[0];
            let cap = (n as f64 * gs[0] - sum) / sum;
            if cap < worst_margin {
                worst_margin = cap;
                worst_point = lam.clone();
            }
            if cap < -1e-12 {
                bad = true;
            }
            for &gi in gs.iter().take(kappa + 1) {
                let slack = (gi - head) / sum;
                if slack < worst_margin {
                    worst_margin = slack;
                    worst_point = lam.clone();
                }
                if slack < -1e-12 {
                    bad = true;
                }
            }
        }
        if bad {
            violations += 1;
        }
    }
    Ok(EllipticityCertificate {
        full: false,
        theta_floor: theta_lower,
        min_grad,
        worst_margin,
        worst_point,
        samples,
        probes,
        violations,
    })
}

/// Positive floor on the normalized gradient share for the transformed
/// operator. Requires rho strictly below the base scale; at equality the
/// floor genuinely collapses, so the request is refused rather than
/// reported with a hollow epsilon.
pub fn certify_full_ellipticity(
    op: &TransformedOperator,
    samples: usize,
    seed: u64,
) -> Result<EllipticityCertificate> {
    if op.rho() >= op.varrho_base() - 1e-12 {
        return Err(CclError::TransformGate(format!(
            "full uniform ellipticity needs rho strictly below the base scale {}, got {}",
            op.varrho_base(),
            op.rho()
        )));
    }
    let pts = gather_points(op.domain(), seed, samples)?;
    let probes = pts.len() - samples;
    let mut theta_floor = f64::INFINITY;
    let mut min_grad = f64::INFINITY;
    let mut worst_point = Vec::new();
    let mut violations = 0usize;
    for lam in &pts {
        let (_, g) = op.eval_grad(lam)?;
        for &gi in &g {
            if gi < min_grad {
                min_grad = gi;
            }
        }
        match theta_of_grad(&g) {
            Some(th) => {
                if th < theta_floor {
                    theta_floor = th;
                    worst_point = lam.clone();
                }
                if !(th > 0.0) {
                    violations += 1;
                }
            }
            None => violations += 1,
        }
    }
    let full = violations == 0 && theta_floor > 0.0;
    Ok(EllipticityCertificate {
        full,
        theta_floor,
        min_grad,
        worst_margin: theta_floor,
        worst_point,
        samples,
        probes,
        violations,
    })
}

/// Midpoint concavity test over interior pairs (midpoints of interior
/// points stay interior by convexity of the cone).
pub fn certify_concavity<E>(domain: &ConeSpec, eval: E, pairs: usize, seed: u64) -> Result<ConcavityReport>
where
    E: Fn(&[f64]) -> Result<f64>,
{
    let pts = sample_interior(domain, 2 * pairs, seed, pairs.max(8) * 8000)?;
    let mut violations = 0usize;
    let mut worst_gap = f64::INFINITY;
    let mut worst_pair = None;
    for pair in pts.chunks(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let mid: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| 0.5 * (x + y)).collect();
        let (fa, fb, fm) = (eval(a)?, eval(b)?, eval(&mid)?);
        let gap = fm - 0.5 * (fa + fb);
        if gap < worst_gap {
            worst_gap = gap;
            worst_pair = Some((a.clone(), b.clone()));
        }
        if gap < -1e-10 {
            violations += 1;
        }
    }
    Ok(ConcavityReport { pairs, violations, worst_gap, worst_pair })
}

/// Full-ellipticity floors along a family of transform parameters.
pub fn rho_sweep(
    f: &SymmetricFunctionSpec,
    rhos: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let op = TransformedOperator::new(f.clone(), rho)?;
        let cert = certify_full_ellipticity(&op, samples, seed)?;
        out.push((rho, cert.theta_floor));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symfunc::SymmetricFunctionSpec as Fs;

    #[test]
    fn trace_passes_partial_with_the_exact_theta() {
        let cert = certify_partial_ellipticity(&Fs::sigma1(5), 1.0 / 5.0, 64, 1).unwrap();
        assert_eq!(cert.violations, 0);
        assert!(cert.worst_margin >= -1e-12);
    }

    #[test]
    fn sigma_roots_pass_partial_with_certified_theta() {
        use crate::cones::invariants::compute_theta;
        for (n, k) in [(4usize, 2usize), (5, 3), (6, 4)] {
            let f = Fs::sigma_k_root(n, k);
            let (lo, _) = compute_theta(f.cone(), 11, 20_000).unwrap();
            let cert = certify_partial_ellipticity(&f, lo, 200, 2).unwrap();
            assert_eq!(cert.violations, 0, "n={n} k={k} margin={}", cert.worst_margin);
        }
    }

    #[test]
    fn top_root_ratio_decays_like_one_over_t() {
        // grad of sigma_n^(1/n) at (1,...,1,t) has last/first share 1/t,
        // so no inequality beyond index kappa+1 = 1 can hold uniformly.
        let f = Fs::sigma_k_root(5, 5);
        for t in [10.0f64, 100.0, 1000.0] {
            let lam = [1.0, 1.0, 1.0, 1.0, t];
            let (_, g) = f.eval_grad(&lam).unwrap();
            let ratio = g[4] / g[0];
            assert!((ratio - 1.0 / t).abs() <= 1e-10 / t, "t={t} ratio={ratio}");
        }
    }

    #[test]
    fn full_certificate_requires_strict_rho() {
        let f = Fs::sigma_k_root(4, 2);
        let at_scale = TransformedOperator::new(f.clone(), 2.0).unwrap();
        assert!(certify_full_ellipticity(&at_scale, 16, 1).is_err());
        let below = TransformedOperator::new(f, 1.0).unwrap();
        let cert = certify_full_ellipticity(&below, 64, 1).unwrap();
        assert!(cert.full);
        assert!(cert.theta_floor > 0.1, "floor {}", cert.theta_floor);
        assert_eq!(cert.violations, 0);
    }

    #[test]
    fn trace_base_gives_exactly_one_over_n() {
        let op = TransformedOperator::new(Fs::sigma1(6), 1.0).unwrap();
        let cert = certify_full_ellipticity(&op, 32, 9).unwrap();
        assert!((cert.theta_floor - 1.0 / 6.0).abs() < 1e-13);
    }

    #[test]
    fn floor_decays_as_rho_approaches_the_scale() {
        let f = Fs::sigma_k_root(4, 2);
        let sweep = rho_sweep(&f, &[1.0, 1.9, 1.99], 64, 5).unwrap();
        assert!(sweep[0].1 > sweep[1].1 && sweep[1].1 > sweep[2].1, "{sweep:?}");
        // Frozen closed form at the deepest probe: (1 - rho/(2 + d)) / (4 - rho).
        let d = PROBE_DELTAS[PROBE_DELTAS.len() - 1];
        for &(rho, floor) in &sweep {
            let want = (1.0 - rho / (2.0 + d)) / (4.0 - rho);
            assert!(
                (floor - want).abs() <= 0.35 * want,
                "rho={rho} floor={floor} want={want}"
            );
        }
        assert!(sweep[0].1 / sweep[2].1 >= 10.0);
    }

    #[test]
    fn concavity_holds_for_roots_and_their_transforms() {
        let f = Fs::sigma_k_root(4, 2);
        let rep = certify_concavity(f.cone(), |lam| f.eval(lam), 500, 3).unwrap();
        assert_eq!(rep.violations, 0, "worst gap {}", rep.worst_gap);
        let op = TransformedOperator::new(f, 1.0).unwrap();
        let dom = op.domain().clone();
        let rep = certify_concavity(&dom, |lam| op.eval(lam), 500, 4).unwrap();
        assert_eq!(rep.violations, 0, "worst gap {}", rep.worst_gap);
    }
}
