//! Scale invariants of a cone: the boundary-flatness index kappa, the
//! diagonal-reach scale varrho, the type split, and the uniform-ellipticity
//! ratio theta, plus the gated transform/projection constructors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cones::sampling::gauss;
use crate::cones::{membership, ConeInvariants, ConeSpec, ConeType, MembershipClass};
use crate::error::{CclError, Result};

const MEMBER_TOL: f64 = 1e-12;
const VARRHO_TOL: f64 = 1e-10;
const VARRHO_MAX_ITER: usize = 200;
/// |varrho - (kappa+1)| below this flags the equality case.
const RIGIDITY_TOL: f64 = 1e-7;

fn interior(spec: &ConeSpec, lam: &[f64]) -> Result<bool> {
    Ok(membership(spec, lam, MEMBER_TOL)?.class == MembershipClass::Interior)
}

/// Largest count of leading zeros k such that (0,...,0,1,...,1) with k zeros
/// is interior; ranges over 0..n-1 and is monotone by cone monotonicity.
pub fn compute_kappa(spec: &ConeSpec) -> Result<usize> {
    spec.validate()?;
    let n = spec.dimension();
    let mut kappa = 0;
    for k in 0..n {
        let mut probe = vec![1.0; n];
        for p in probe.iter_mut().take(k) {
            *p = 0.0;
        }
        if interior(spec, &probe)? {
            kappa = k;
        } else {
            break;
        }
    }
    Ok(kappa)
}

/// Supremum of rho with (1,...,1,1-rho) interior, found by bisection on
/// [1, n]. Hits the edges exactly for the orthant (1) and the half-space
/// cone of positive trace (n).
pub fn compute_varrho(spec: &ConeSpec) -> Result<f64> {
    spec.validate()?;
    let n = spec.dimension();
    let probe = |rho: f64| -> Result<bool> {
        let mut lam = vec![1.0; n];
        lam[n - 1] = 1.0 - rho;
        interior(spec, &lam)
    };
    let mut lo = 1.0;
    let mut hi = n as f64;
    if !probe(lo + VARRHO_TOL)? {
        return Ok(1.0);
    }
    if probe(hi - VARRHO_TOL)? {
        return Ok(hi);
    }
    for _ in 0..VARRHO_MAX_ITER {
        if hi - lo <= VARRHO_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo > 10.0 * VARRHO_TOL {
        return Err(CclError::BracketFailure(format!(
            "varrho bisection stalled at [{lo}, {hi}]"
        )));
    }
    Ok(0.5 * (lo + hi))
}

/// Type split: whether the last coordinate axis direction is interior.
pub fn cone_type(spec: &ConeSpec) -> Result<ConeType> {
    spec.validate()?;
    let n = spec.dimension();
    let mut axis = vec![0.0; n];
    axis[n - 1] = 1.0;
    Ok(if interior(spec, &axis)? { ConeType::Type2 } else { ConeType::Type1 })
}

/// Closed-form prediction for the varrho of a transformed cone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VarrhoBound {
    Exact(f64),
    StrictlyAbove(f64),
}

/// What the transform with parameter `rho` does to a base cone whose own
/// scale is `varrho_base`, by case on the sign of rho and the base type.
pub fn transform_varrho_bound(
    base_type: ConeType,
    varrho_base: f64,
    rho: f64,
    n: usize,
) -> VarrhoBound {
    let nf = n as f64;
    if rho < 0.0 {
        VarrhoBound::Exact(varrho_base + varrho_base * (nf - varrho_base) / (varrho_base - rho))
    } else {
        match base_type {
            ConeType::Type1 => VarrhoBound::Exact(nf - rho),
            ConeType::Type2 => VarrhoBound::StrictlyAbove(nf - rho),
        }
    }
}

/// Transform parameter that lands the image cone's varrho on `target` when
/// the base is the positive orthant (scale 1); target must sit in (1, n).
pub fn rho_hitting_varrho(target: f64, n: usize) -> f64 {
    (target - n as f64) / (target - 1.0)
}

/// Gate and build the transformed cone. Requires nonzero rho at most the
/// base scale (inclusive up to a tolerance) and strictly below n.
pub fn transform_cone(base: ConeSpec, rho: f64) -> Result<ConeSpec> {
    base.validate()?;
    let n = base.dimension();
    if rho == 0.0 {
        return Err(CclError::TransformGate("rho must be nonzero".into()));
    }
    if rho >= n as f64 - 1e-12 {
        return Err(CclError::TransformGate(format!(
            "rho = {rho} too close to the dimension {n}"
        )));
    }
    let vb = compute_varrho(&base)?;
    if rho > vb + 1e-9 {
        return Err(CclError::TransformGate(format!(
            "rho = {rho} exceeds the base scale {vb}"
        )));
    }
    Ok(ConeSpec::Transform { n, rho, base: Box::new(base) })
}

/// Gate and build the lower-dimensional projection. The base must be Type1
/// and the target must keep at least kappa+1 coordinates.
pub fn project_cone(base: ConeSpec, target_dim: usize) -> Result<ConeSpec> {
    base.validate()?;
    let n = base.dimension();
    if cone_type(&base)? != ConeType::Type1 {
        return Err(CclError::ProjectionUnavailable(
            "projection needs a Type1 base; a Type2 base already contains every padded ray".into(),
        ));
    }
    let kappa = compute_kappa(&base)?;
    if target_dim < kappa + 1 || target_dim >= n {
        return Err(CclError::ProjectionUnavailable(format!(
            "target_dim = {target_dim} outside {}..{n}",
            kappa + 1
        )));
    }
    Ok(ConeSpec::Projection { n: target_dim, target_dim, base: Box::new(base) })
}

/// Result of the theta search: a certified feasible lower bound and a
/// boundary-extrapolated estimate (clipped to [lower, 1/n]).
struct ThetaSearch {
    lower: f64,
    estimate: f64,
}

/// Objective: alpha[0] / (n * (sum of positives - sum of the other negated
/// magnitudes)), maximized over alpha > 0 with the sign-flipped vector
/// interior at normalized margin at least `floor`.
fn theta_ratio(n: usize, kappa: usize, alpha: &[f64]) -> Option<f64> {
    let pos: f64 = alpha[kappa..].iter().sum();
    let neg_rest: f64 = alpha[1..kappa].iter().sum();
    let den = n as f64 * (pos - neg_rest);
    if den <= 0.0 {
        return None;
    }
    Some(alpha[0] / den)
}

fn nu_of_alpha(kappa: usize, alpha: &[f64]) -> Vec<f64> {
    alpha
        .iter()
        .enumerate()
        .map(|(i, &a)| if i < kappa { -a } else { a })
        .collect()
}

fn normalized_margin(spec: &ConeSpec, nu: &[f64]) -> Result<f64> {
    let v = membership(spec, nu, MEMBER_TOL)?;
    let scale = nu.iter().fold(0.0_f64, |s, &x| s.max(x.abs())).max(f64::MIN_POSITIVE);
    Ok(v.margin / scale)
}

/// Push alpha[0] to the margin wall: the ratio grows and the margin shrinks
/// monotonically in alpha[0] (adding e_1 to the sign-flipped vector moves
/// it deeper into the cone), so the per-shape optimum always sits at margin
/// = floor. Returns the ratio there, or None if the shape is infeasible
/// even as alpha[0] -> 0, plus the membership-call count.
fn wall_ratio(
    spec: &ConeSpec,
    kappa: usize,
    floor: f64,
    alpha: &mut [f64],
) -> Result<(Option<f64>, usize)> {
    let n = spec.dimension();
    if theta_ratio(n, kappa, alpha).is_none() {
        return Ok((None, 0));
    }
    let mut calls = 0usize;
    let scale = alpha[kappa..].iter().fold(f64::MIN_POSITIVE, |s, &x| s.max(x));
    let feasible = |a0: f64, alpha: &mut [f64], calls: &mut usize| -> Result<bool> {
        alpha[0] = a0;
        let nu = nu_of_alpha(kappa, alpha);
        *calls += 1;
        Ok(normalized_margin(spec, &nu)? >= floor)
    };
    let mut lo = 1e-9 * scale;
    if !feasible(lo, alpha, &mut calls)? {
        return Ok((None, calls));
    }
    let mut hi = scale;
    if feasible(hi, alpha, &mut calls)? {
        let mut expanded = false;
        for _ in 0..50 {
            let wide = hi * 2.0;
            if feasible(wide, alpha, &mut calls)? {
                hi = wide;
            } else {
                lo = hi;
                hi = wide;
                expanded = true;
                break;
            }
        }
        if !expanded {
            // Unbounded pivot: the denominator does not involve alpha[0],
            // so report the ratio at the cap.
            alpha[0] = hi;
            return Ok((theta_ratio(n, kappa, alpha), calls));
        }
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid, alpha, &mut calls)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    alpha[0] = lo;
    Ok((theta_ratio(n, kappa, alpha), calls))
}

fn theta_climb(
    spec: &ConeSpec,
    kappa: usize,
    floor: f64,
    start: &[f64],
    call_budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    let n = spec.dimension();
    let mut alpha = start.to_vec();
    let mut used = 0usize;
    let mut best = 0.0_f64;
    let mut have = false;
    // Repair the shape until alpha[0] has room under the floor.
    for _ in 0..100 {
        let (r, calls) = wall_ratio(spec, kappa, floor, &mut alpha)?;
        used += calls;
        if let Some(r) = r {
            best = r;
            have = true;
            break;
        }
        if kappa > 1 {
            for a in alpha.iter_mut().take(kappa).skip(1) {
                *a *= 0.5;
            }
        } else {
            for a in alpha.iter_mut().skip(kappa.max(1)) {
                *a *= 1.5;
            }
        }
    }
    if !have {
        return Ok((alpha, 0.0));
    }
    let mut step = 0.5_f64;
    while used < call_budget {
        let mut cand = alpha.clone();
        if kappa > 1 && rng.gen::<f64>() < 0.2 {
            let s = (step * gauss(rng)).exp();
            for a in cand.iter_mut().take(kappa).skip(1) {
                *a *= s;
            }
        } else {
            let i = rng.gen_range(1..n);
            cand[i] *= (step * gauss(rng)).exp();
        }
        let top = cand.iter().fold(0.0_f64, |s, &x| s.max(x));
        if !top.is_finite() || top <= 0.0 {
            used += 1;
            continue;
        }
        for a in cand.iter_mut() {
            *a /= top;
        }
        let (r, calls) = wall_ratio(spec, kappa, floor, &mut cand)?;
        used += calls.max(1);
        match r {
            Some(r) if r > best => {
                alpha = cand;
                best = r;
            }
            _ => {
                step *= 0.98;
                if step < 0.02 {
                    step = 0.4;
                }
            }
        }
    }
    Ok((alpha, best))
}

fn compute_theta_search(spec: &ConeSpec, kappa: usize, seed: u64, budget: usize) -> Result<ThetaSearch> {
    let n = spec.dimension();
    let nf = n as f64;
    if kappa == 0 {
        // Sign-flipping nothing leaves alpha itself, always interior, and
        // alpha[0]/(n*sum) has supremum 1/n along a single-spike family.
        return Ok(ThetaSearch { lower: 1.0 / nf, estimate: 1.0 / nf });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let floors = [0.08, 0.04, 0.02, 0.01, 0.005];
    let restarts = 3;
    let per = (budget / (floors.len() * restarts)).max(500);
    let mut curve: Vec<f64> = Vec::with_capacity(floors.len());
    let mut lower = 0.0_f64;
    let mut carry: Vec<Vec<f64>> = (0..restarts)
        .map(|_| {
            let mut a = vec![1.0; n];
            for (i, ai) in a.iter_mut().enumerate() {
                if i < kappa {
                    *ai = 0.05 * (1.0 + 0.2 * rng.gen::<f64>());
                } else {
                    *ai = 1.0 + rng.gen::<f64>();
                }
            }
            a
        })
        .collect();
    for &floor in &floors {
        let mut best_at_floor = 0.0_f64;
        for start in carry.iter_mut() {
            let (alpha, ratio) = theta_climb(spec, kappa, floor, start, per, &mut rng)?;
            *start = alpha;
            if ratio > best_at_floor {
                best_at_floor = ratio;
            }
        }
        curve.push(best_at_floor);
        if best_at_floor > lower {
            lower = best_at_floor;
        }
    }
    // Geometric-floor Richardson extrapolation to margin zero from the last
    // three points of the curve, with a linear fallback.
    let m = curve.len();
    let (r1, r2, r3) = (curve[m - 3], curve[m - 2], curve[m - 1]);
    let d1 = r2 - r1;
    let d2 = r3 - r2;
    let mut estimate = if d1 > 0.0 && d2 > 0.0 && d2 < d1 {
        let q = d2 / d1;
        r3 + d2 * q / (1.0 - q)
    } else {
        r3 + d2.max(0.0)
    };
    if !estimate.is_finite() {
        estimate = lower;
    }
    estimate = estimate.clamp(lower, 1.0 / nf);
    Ok(ThetaSearch { lower, estimate })
}

/// Feasible lower bound and boundary extrapolation for theta.
pub fn compute_theta(spec: &ConeSpec, seed: u64, budget: usize) -> Result<(f64, f64)> {
    spec.validate()?;
    let kappa = compute_kappa(spec)?;
    let s = compute_theta_search(spec, kappa, seed, budget)?;
    Ok((s.lower, s.estimate))
}

/// Default evaluation budget for the theta search.
pub const THETA_BUDGET: usize = 45_000;

/// Full invariant bundle with self-consistency checks.
///
/// Checks, in order: the all-ones ray is interior; the kappa witness is
/// interior while the next zero pattern is not; the type matches kappa;
/// varrho brackets via nearby diagonal probes; the chain inequalities
/// linking varrho, kappa and theta_lower; midpoint convexity on sampled
/// interior pairs.
pub fn invariant_report(spec: &ConeSpec, seed: u64, budget: usize) -> Result<ConeInvariants> {
    spec.validate()?;
    let n = spec.dimension();
    let nf = n as f64;
    let kappa = compute_kappa(spec)?;
    let varrho = compute_varrho(spec)?;
    let ctype = cone_type(spec)?;
    let (theta_lower, theta_estimate) = {
        let s = compute_theta_search(spec, kappa, seed, budget)?;
        (s.lower, s.estimate)
    };
    let mut checks_passed = 0usize;
    let fail = |what: &str| -> CclError {
        CclError::InvariantViolation(format!("{what} for {spec:?}"))
    };

    if interior(spec, &vec![1.0; n])? {
        checks_passed += 1;
    } else {
        return Err(fail("all-ones ray not interior"));
    }

    let mut witness = vec![1.0; n];
    for w in witness.iter_mut().take(kappa) {
        *w = 0.0;
    }
    let next_fails = if kappa + 1 < n {
        let mut beyond = vec![1.0; n];
        for b in beyond.iter_mut().take(kappa + 1) {
            *b = 0.0;
        }
        !interior(spec, &beyond)?
    } else {
        true
    };
    if interior(spec, &witness)? && next_fails {
        checks_passed += 1;
    } else {
        return Err(fail("kappa witness inconsistent"));
    }

    let type_from_kappa = if kappa == n - 1 { ConeType::Type2 } else { ConeType::Type1 };
    if type_from_kappa == ctype {
        checks_passed += 1;
    } else {
        return Err(fail("type disagrees with kappa"));
    }

    let below_ok = {
        let mut lam = vec![1.0; n];
        lam[n - 1] = 1.0 - (varrho - 1e-6);
        varrho <= 1.0 + 1e-6 || interior(spec, &lam)?
    };
    let above_ok = {
        let mut lam = vec![1.0; n];
        lam[n - 1] = 1.0 - (varrho + 1e-6);
        varrho >= nf - 1e-6 || !interior(spec, &lam)?
    };
    if below_ok && above_ok {
        checks_passed += 1;
    } else {
        return Err(fail("varrho bracket probes inconsistent"));
    }

    let chain_a = varrho + 1e-6 >= 1.0 + nf * kappa as f64 * theta_lower;
    let chain_b = {
        let denom = 1.0 - kappa as f64 * theta_lower;
        denom > 0.0 && varrho + 1e-6 >= 1.0 / denom
    };
    if chain_a && chain_b {
        checks_passed += 1;
    } else {
        return Err(fail("scale/theta chain inequality violated"));
    }

    let samples = super::sampling::sample_interior(spec, 16, seed ^ 0x9e3779b97f4a7c15, 200_000)?;
    let mut convex_ok = true;
    for pair in samples.chunks(2) {
        if pair.len() < 2 {
            break;
        }
        let mid: Vec<f64> = pair[0].iter().zip(&pair[1]).map(|(a, b)| 0.5 * (a + b)).collect();
        if !interior(spec, &mid)? {
            convex_ok = false;
            break;
        }
    }
    if convex_ok {
        checks_passed += 1;
    } else {
        return Err(fail("midpoint of interior samples escaped"));
    }

    Ok(ConeInvariants {
        kappa,
        varrho,
        theta_lower,
        theta_estimate,
        cone_type: ctype,
        rigidity: (varrho - (kappa as f64 + 1.0)).abs() <= RIGIDITY_TOL,
        varrho_tol: VARRHO_TOL,
        theta_budget: budget,
        theta_seed: seed,
        checks_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn garding_scale_is_n_over_k() {
        for n in 2..=8 {
            for k in 1..=n {
                let spec = ConeSpec::garding(n, k);
                let v = compute_varrho(&spec).unwrap();
                assert!(
                    (v - n as f64 / k as f64).abs() <= 1e-8,
                    "n={n} k={k} got {v}"
                );
                assert_eq!(compute_kappa(&spec).unwrap(), n - k);
            }
        }
    }

    #[test]
    fn subset_sum_invariants_are_integers() {
        for n in [3usize, 5, 7] {
            for k in 1..=n {
                let spec = ConeSpec::pk(n, k);
                assert_eq!(compute_kappa(&spec).unwrap(), k - 1, "n={n} k={k}");
                let v = compute_varrho(&spec).unwrap();
                assert!((v - k as f64).abs() <= 1e-8, "n={n} k={k} got {v}");
            }
        }
    }

    #[test]
    fn type_split_matches_kappa() {
        let g1 = ConeSpec::garding(5, 1);
        assert_eq!(cone_type(&g1).unwrap(), ConeType::Type2);
        let g2 = ConeSpec::garding(5, 2);
        assert_eq!(cone_type(&g2).unwrap(), ConeType::Type1);
        let hs_half = ConeSpec::halfspace(5, 0.5);
        assert_eq!(cone_type(&hs_half).unwrap(), ConeType::Type2);
        let hs_one = ConeSpec::halfspace(5, 1.0);
        assert_eq!(cone_type(&hs_one).unwrap(), ConeType::Type1);
    }

    #[test]
    fn halfspace_one_equals_subset_sum_n_minus_one() {
        let n = 6;
        let hs = ConeSpec::halfspace(n, 1.0);
        assert_eq!(compute_kappa(&hs).unwrap(), n - 2);
        let v = compute_varrho(&hs).unwrap();
        assert!((v - (n as f64 - 1.0)).abs() <= 1e-8);
    }

    #[test]
    fn halfspace_scale_formulas() {
        // 0 < rho <= 1: scale n - rho. rho < 0: 1 + (n-1)/(1-rho).
        for n in [4usize, 6] {
            let nf = n as f64;
            for rho in [1.0, 0.5] {
                let v = compute_varrho(&ConeSpec::halfspace(n, rho)).unwrap();
                assert!((v - (nf - rho)).abs() <= 1e-8, "n={n} rho={rho} got {v}");
            }
            for rho in [-1.0, -2.0] {
                let v = compute_varrho(&ConeSpec::halfspace(n, rho)).unwrap();
                let want = 1.0 + (nf - 1.0) / (1.0 - rho);
                assert!((v - want).abs() <= 1e-8, "n={n} rho={rho} got {v}");
            }
        }
    }

    #[test]
    fn transform_gate_accepts_and_rejects() {
        assert!(transform_cone(ConeSpec::garding(4, 2), 2.0).is_ok());
        assert!(transform_cone(ConeSpec::garding(4, 2), 2.1).is_err());
        assert!(transform_cone(ConeSpec::garding(4, 2), 0.0).is_err());
        assert!(transform_cone(ConeSpec::garding(4, 2), -3.0).is_ok());
        assert!(transform_cone(ConeSpec::garding(4, 1), 4.0).is_err());
    }

    #[test]
    fn transformed_scale_matches_case_formulas() {
        // Negative rho on the orthant: exact rational value.
        let tr = transform_cone(ConeSpec::garding(4, 4), -2.0).unwrap();
        let v = compute_varrho(&tr).unwrap();
        let want = match transform_varrho_bound(ConeType::Type1, 1.0, -2.0, 4) {
            VarrhoBound::Exact(x) => x,
            VarrhoBound::StrictlyAbove(_) => unreachable!(),
        };
        assert!((v - want).abs() <= 1e-8, "got {v} want {want}");

        // Type1 base, positive rho: exact n - rho.
        let tr = transform_cone(ConeSpec::garding(4, 2), 1.0).unwrap();
        let v = compute_varrho(&tr).unwrap();
        assert!((v - 3.0).abs() <= 1e-8);

        // Type2 base, positive rho: strictly above n - rho.
        let tr = transform_cone(ConeSpec::garding(4, 1), 2.0).unwrap();
        let v = compute_varrho(&tr).unwrap();
        assert!(v > 2.0 + 1e-6, "got {v}");
    }

    #[test]
    fn parameter_hitting_a_scale_target() {
        for n in [4usize, 6] {
            for t in [1.5, 2.0, 3.7] {
                let rho = rho_hitting_varrho(t, n);
                assert!(rho < 0.0);
                let tr = transform_cone(ConeSpec::garding(n, n), rho).unwrap();
                let v = compute_varrho(&tr).unwrap();
                assert!((v - t).abs() <= 1e-7, "n={n} t={t} rho={rho} got {v}");
            }
        }
    }

    #[test]
    fn projection_gates() {
        // Type2 base refused.
        assert!(project_cone(ConeSpec::garding(5, 1), 4).is_err());
        // Too small a target refused: kappa(Garding_2(R^5)) = 3.
        assert!(project_cone(ConeSpec::garding(5, 2), 3).is_err());
        assert!(project_cone(ConeSpec::garding(5, 2), 4).is_ok());
        assert!(project_cone(ConeSpec::pk(5, 3), 4).is_ok());
    }

    #[test]
    fn projected_subset_sum_cone_is_the_smaller_subset_sum_cone() {
        // Frozen cross-check: dropping one slot from the 3-subset-sum cone
        // in R^5 gives exactly the 3-subset-sum cone in R^4.
        let proj = project_cone(ConeSpec::pk(5, 3), 4).unwrap();
        let direct = ConeSpec::pk(4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..400 {
            let lam: Vec<f64> = (0..4).map(|_| 1.0 + 2.0 * gauss(&mut rng)).collect();
            let a = membership(&proj, &lam, 1e-7).unwrap().class;
            let b = membership(&direct, &lam, 1e-7).unwrap().class;
            if a == MembershipClass::Boundary || b == MembershipClass::Boundary {
                continue;
            }
            assert_eq!(a, b, "lam = {lam:?}");
        }
        let inv = invariant_report(&proj, 11, THETA_BUDGET).unwrap();
        assert_eq!(inv.kappa, 2);
        assert!((inv.varrho - 3.0).abs() <= 1e-8);
        assert!(inv.rigidity);
    }

    #[test]
    fn theta_exact_for_flat_kappa() {
        let (lo, est) = compute_theta(&ConeSpec::garding(4, 4), 1, 1000).unwrap();
        assert_eq!(lo, 0.25);
        assert_eq!(est, 0.25);
        let (lo, est) = compute_theta(&ConeSpec::pk(6, 1), 1, 1000).unwrap();
        assert_eq!(lo, 1.0 / 6.0);
        assert_eq!(est, 1.0 / 6.0);
    }

    #[test]
    fn theta_for_sigma2_cone_in_dim_four() {
        // Frozen oracle: the exact value is 1/16; the search must stay
        // below it and the extrapolation must land within 15 percent.
        let (lo, est) = compute_theta(&ConeSpec::garding(4, 2), 42, THETA_BUDGET).unwrap();
        assert!(lo <= 1.0 / 16.0 + 1e-9, "lower {lo} crossed the supremum");
        assert!(lo > 0.03, "lower {lo} implausibly weak");
        assert!((est - 1.0 / 16.0).abs() <= 0.15 / 16.0, "estimate {est}");
    }

    #[test]
    fn trace_cone_theta_stays_below_one_over_n() {
        let n = 5;
        let (lo, _) = compute_theta(&ConeSpec::garding(n, 1), 3, 20_000).unwrap();
        assert!(lo < 1.0 / n as f64);
        assert!(lo > 0.5 / n as f64, "lower {lo} too far from the supremum");
    }

    #[test]
    fn invariant_report_counts_all_checks() {
        let inv = invariant_report(&ConeSpec::garding(4, 2), 5, 8000).unwrap();
        assert_eq!(inv.checks_passed, 6);
        assert_eq!(inv.kappa, 2);
        assert!(!inv.rigidity);
        assert_eq!(inv.cone_type, ConeType::Type1);
    }

    #[test]
    fn rigidity_flags_exactly_the_subset_sum_family() {
        let flagged = invariant_report(&ConeSpec::pk(5, 3), 5, 8000).unwrap();
        assert!(flagged.rigidity);
        let orthant = invariant_report(&ConeSpec::garding(3, 3), 5, 2000).unwrap();
        assert!(orthant.rigidity); // kappa 0, varrho 1
        let smooth = invariant_report(&ConeSpec::garding(6, 2), 5, 8000).unwrap();
        assert!(!smooth.rigidity);
    }
}
