//! Open symmetric convex cones in R^n with margin-reporting membership
//! oracles, their scale/type invariants, the trace-preserving linear
//! transform between cones, and projections to lower dimensions.

pub mod invariants;
pub mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{CclError, Result};
use crate::scalar::{c, Scalar};

/// Constructive description of an open symmetric convex cone containing the
/// positive orthant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConeSpec {
    /// Connected component of {sigma_k > 0} containing the positive orthant,
    /// decided by sigma_j > 0 for all j <= k.
    Garding { n: usize, k: usize },
    /// Vectors whose every k-element subset sum is positive.
    Pk { n: usize, k: usize },
    /// {lambda : sum(lambda) - rho * lambda_i > 0 for every i}.
    Halfspace { n: usize, rho: f64 },
    /// Pullback {lambda : mu(lambda) in base} under the trace-preserving map
    /// mu_i = (sum(lambda) - rho * lambda_i) / (n - rho).
    Transform { n: usize, rho: f64, base: Box<ConeSpec> },
    /// {lambda : (lambda, R, ..., R) in base for some R > 0}.
    Projection { n: usize, target_dim: usize, base: Box<ConeSpec> },
}

/// Classification of a point relative to an open cone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MembershipClass {
    Interior,
    Boundary,
    Exterior,
}

/// Membership verdict with a signed, 1-homogeneous margin proxy.
#[derive(Clone, Copy, Debug)]
pub struct MembershipVerdict<F> {
    pub class: MembershipClass,
    pub margin: F,
    /// True when a projection exhausted its R-doubling ladder.
    pub r_capped: bool,
}

/// Cone type: whether (0, ..., 0, 1) sits on the boundary or inside.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeType {
    Type1,
    Type2,
}

/// Invariant bundle for one cone, with the tolerances it was computed at.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeInvariants {
    pub kappa: usize,
    pub varrho: f64,
    pub theta_lower: f64,
    pub theta_estimate: f64,
    pub cone_type: ConeType,
    /// Set when varrho equals kappa + 1 (to tolerance); the subset-sum cones
    /// are exactly the equality specimens.
    pub rigidity: bool,
    pub varrho_tol: f64,
    pub theta_budget: usize,
    pub theta_seed: u64,
    pub checks_passed: usize,
}

impl ConeSpec {
    pub fn garding(n: usize, k: usize) -> Self {
        ConeSpec::Garding { n, k }
    }

    pub fn pk(n: usize, k: usize) -> Self {
        ConeSpec::Pk { n, k }
    }

    pub fn halfspace(n: usize, rho: f64) -> Self {
        ConeSpec::Halfspace { n, rho }
    }

    /// Ambient dimension.
    pub fn dimension(&self) -> usize {
        match self {
            ConeSpec::Garding { n, .. }
            | ConeSpec::Pk { n, .. }
            | ConeSpec::Halfspace { n, .. }
            | ConeSpec::Transform { n, .. }
            | ConeSpec::Projection { n, .. } => *n,
        }
    }

    /// Structural validation (cheap checks; gates that need invariants live
    /// on the constructors in [`invariants`]).
    pub fn validate(&self) -> Result<()> {
        match self {
            ConeSpec::Garding { n, k } | ConeSpec::Pk { n, k } => {
                if *n < 2 {
                    return Err(CclError::InvalidCone(format!("n = {n} < 2")));
                }
                if *k < 1 || *k > *n {
                    return Err(CclError::InvalidCone(format!("k = {k} outside 1..={n}")));
                }
                Ok(())
            }
            ConeSpec::Halfspace { n, rho } => {
                if *n < 2 {
                    return Err(CclError::InvalidCone(format!("n = {n} < 2")));
                }
                if *rho == 0.0 || *rho > 1.0 {
                    return Err(CclError::InvalidCone(format!(
                        "halfspace rho = {rho} must be nonzero and <= 1 so the positive orthant stays inside"
                    )));
                }
                Ok(())
            }
            ConeSpec::Transform { n, rho, base } => {
                base.validate()?;
                if *n != base.dimension() {
                    return Err(CclError::DimensionMismatch { expected: base.dimension(), got: *n });
                }
                if *rho == 0.0 {
                    return Err(CclError::TransformGate("rho must be nonzero".into()));
                }
                if *rho >= *n as f64 {
                    return Err(CclError::TransformGate(format!(
                        "rho = {rho} must stay below the dimension {n}"
                    )));
                }
                Ok(())
            }
            ConeSpec::Projection { n, target_dim, base } => {
                base.validate()?;
                if n != target_dim {
                    return Err(CclError::InvalidCone(format!(
                        "projection n = {n} must equal target_dim = {target_dim}"
                    )));
                }
                if *target_dim < 2 || *target_dim >= base.dimension() {
                    return Err(CclError::InvalidCone(format!(
                        "target_dim = {target_dim} outside 2..{}",
                        base.dimension()
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Forward map of the cone transform: mu_i = (sum - rho*lambda_i)/(n - rho).
pub fn mu_of_lambda<F: Scalar>(rho: f64, lam: &[F]) -> Vec<F> {
    let n = lam.len();
    let rho = c::<F>(rho);
    let denom = c::<F>(n as f64) - rho;
    let sum = lam.iter().fold(F::zero(), |s, &x| s + x);
    lam.iter().map(|&x| (sum - rho * x) / denom).collect()
}

/// Inverse map: lambda_i = (sum(mu) - (n - rho)*mu_i)/rho.
pub fn lambda_of_mu<F: Scalar>(rho: f64, mu: &[F]) -> Vec<F> {
    let n = mu.len();
    let rho = c::<F>(rho);
    let nr = c::<F>(n as f64) - rho;
    let sum = mu.iter().fold(F::zero(), |s, &x| s + x);
    mu.iter().map(|&x| (sum - nr * x) / rho).collect()
}

/// Elementary symmetric polynomials e_0..e_kmax via the product recurrence.
pub fn elementary_symmetric<F: Scalar>(lam: &[F], kmax: usize) -> Vec<F> {
    let mut e = vec![F::zero(); kmax + 1];
    e[0] = F::one();
    for (i, &x) in lam.iter().enumerate() {
        let top = kmax.min(i + 1);
        for j in (1..=top).rev() {
            e[j] = e[j] + x * e[j - 1];
        }
    }
    e
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Signed 1-homogeneous margin proxy; positive inside, negative outside.
fn raw_margin<F: Scalar>(spec: &ConeSpec, lam: &[F]) -> Result<(F, bool)> {
    let n = spec.dimension();
    if lam.len() != n {
        return Err(CclError::DimensionMismatch { expected: n, got: lam.len() });
    }
    match spec {
        ConeSpec::Garding { n, k } => {
            let e = elementary_symmetric(lam, *k);
            let mut worst = F::infinity();
            for j in 1..=*k {
                let scaled = e[j] / c::<F>(binomial(*n, j));
                let inv = c::<F>(1.0 / j as f64);
                let m = if scaled >= F::zero() {
                    scaled.powf(inv)
                } else {
                    -(-scaled).powf(inv)
                };
                if m < worst {
                    worst = m;
                }
            }
            Ok((worst, false))
        }
        ConeSpec::Pk { k, .. } => {
            let mut sorted: Vec<F> = lam.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite entries"));
            let s = sorted[..*k].iter().fold(F::zero(), |s, &x| s + x);
            Ok((s / c::<F>(*k as f64), false))
        }
        ConeSpec::Halfspace { n, rho } => {
            let sum = lam.iter().fold(F::zero(), |s, &x| s + x);
            let r = c::<F>(*rho);
            let mut worst = F::infinity();
            for &x in lam {
                let m = sum - r * x;
                if m < worst {
                    worst = m;
                }
            }
            Ok((worst / c::<F>(*n as f64 + rho.abs()), false))
        }
        ConeSpec::Transform { rho, base, .. } => {
            let mu = mu_of_lambda(*rho, lam);
            raw_margin(base, &mu)
        }
        ConeSpec::Projection { target_dim, base, .. } => {
            let nb = base.dimension();
            let scale = lam
                .iter()
                .fold(F::zero(), |s, &x| s.max(x.abs()))
                .max(F::one());
            let mut ext = vec![F::zero(); nb];
            ext[..*target_dim].copy_from_slice(lam);
            let mut r = scale;
            let mut best = F::neg_infinity();
            let mut capped = true;
            for _ in 0..=60 {
                for slot in ext[*target_dim..].iter_mut() {
                    *slot = r;
                }
                let (m, _) = raw_margin(base, &ext)?;
                if m > best {
                    best = m;
                }
                if m > F::zero() {
                    capped = false;
                    break;
                }
                r = r + r;
            }
            Ok((best, capped))
        }
    }
}

/// Membership oracle with caller-supplied boundary tolerance.
///
/// The margin is normalized against the sup norm of the query point when
/// classifying, so the verdict is scale-invariant.
pub fn membership<F: Scalar>(spec: &ConeSpec, lam: &[F], tol: F) -> Result<MembershipVerdict<F>> {
    if tol <= F::zero() {
        return Err(CclError::InvalidCone("tolerance must be positive".into()));
    }
    let scale = lam.iter().fold(F::zero(), |s, &x| s.max(x.abs()));
    if scale == F::zero() {
        return Ok(MembershipVerdict { class: MembershipClass::Boundary, margin: F::zero(), r_capped: false });
    }
    let (margin, r_capped) = raw_margin(spec, lam)?;
    let band = tol * scale;
    let class = if margin > band {
        MembershipClass::Interior
    } else if margin < -band {
        MembershipClass::Exterior
    } else {
        MembershipClass::Boundary
    };
    Ok(MembershipVerdict { class, margin, r_capped })
}

/// Convenience: strict interior test at the library's default tolerance.
pub fn is_interior<F: Scalar>(spec: &ConeSpec, lam: &[F]) -> Result<bool> {
    Ok(membership(spec, lam, c::<F>(DEFAULT_TOL))?.class == MembershipClass::Interior)
}

/// Default boundary-band tolerance used by the invariant computations.
pub const DEFAULT_TOL: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;

    fn verdict(spec: &ConeSpec, lam: &[f64]) -> MembershipClass {
        membership(spec, lam, 1e-9).unwrap().class
    }

    #[test]
    fn positive_orthant_is_interior_everywhere() {
        let ones = [1.0; 5];
        for spec in [
            ConeSpec::garding(5, 3),
            ConeSpec::pk(5, 3),
            ConeSpec::halfspace(5, -2.0),
            ConeSpec::Transform { n: 5, rho: 1.0, base: Box::new(ConeSpec::garding(5, 2)) },
        ] {
            assert_eq!(verdict(&spec, &ones), MembershipClass::Interior, "{spec:?}");
        }
    }

    #[test]
    fn garding_vertex_goldens() {
        // sigma_2(0,0,1,1) = 1 > 0 with sigma_1 = 2 > 0: interior ray.
        let g2 = ConeSpec::garding(4, 2);
        assert_eq!(verdict(&g2, &[0.0, 0.0, 1.0, 1.0]), MembershipClass::Interior);
        // sigma_2(0,0,0,1) = 0: boundary.
        assert_eq!(verdict(&g2, &[0.0, 0.0, 0.0, 1.0]), MembershipClass::Boundary);
        assert_eq!(verdict(&g2, &[-1.0, -1.0, 1.0, 1.0]), MembershipClass::Exterior);
    }

    #[test]
    fn pk_subset_sum_examples() {
        let p3 = ConeSpec::pk(5, 3);
        assert_eq!(verdict(&p3, &[1.0, 1.0, 1.0, 1.0, 1.0]), MembershipClass::Interior);
        // smallest 3-subset sum of (-1,-1,3,3,3) is 1 > 0
        assert_eq!(verdict(&p3, &[-1.0, -1.0, 3.0, 3.0, 3.0]), MembershipClass::Interior);
        assert_eq!(verdict(&p3, &[-1.0, -1.0, 2.0, 3.0, 3.0]), MembershipClass::Boundary);
        let p1 = ConeSpec::pk(3, 1);
        assert_eq!(verdict(&p1, &[0.5, 1.0, 2.0]), MembershipClass::Interior);
        assert_eq!(verdict(&p1, &[-0.1, 1.0, 2.0]), MembershipClass::Exterior);
    }

    #[test]
    fn transform_of_orthant_matches_halfspace_arithmetic() {
        // rho = -2, n = 4: sum - rho*x = 2.1 + 2*lambda_i > 0 for (1,1,1,-0.9).
        let tr = ConeSpec::Transform { n: 4, rho: -2.0, base: Box::new(ConeSpec::garding(4, 4)) };
        assert_eq!(verdict(&tr, &[1.0, 1.0, 1.0, -0.9]), MembershipClass::Interior);
        let hs = ConeSpec::halfspace(4, -2.0);
        assert_eq!(verdict(&hs, &[1.0, 1.0, 1.0, -0.9]), MembershipClass::Interior);
        assert_eq!(verdict(&hs, &[1.0, 1.0, 1.0, -1.05]), MembershipClass::Exterior);
    }

    #[test]
    fn map_round_trip_is_identity_and_trace_preserving() {
        let lam = [0.3_f64, -0.7, 2.5, 1.1, 0.0];
        for rho in [-2.0, 0.5, 1.0, 2.5] {
            let mu = mu_of_lambda(rho, &lam);
            let back = lambda_of_mu(rho, &mu);
            let sum_l: f64 = lam.iter().sum();
            let sum_m: f64 = mu.iter().sum();
            assert!((sum_l - sum_m).abs() <= 1e-12 * (1.0 + sum_l.abs()));
            for (a, b) in lam.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn diagonal_vectors_are_fixed_points_of_the_map() {
        let lam = [0.7_f64; 6];
        let mu = mu_of_lambda(1.5, &lam);
        for m in mu {
            assert!((m - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_membership_finds_a_lift() {
        // (lambda, R) in Garding_2(R^5) for large R once 4-dim part is sane.
        let proj = ConeSpec::Projection {
            n: 4,
            target_dim: 4,
            base: Box::new(ConeSpec::garding(5, 2)),
        };
        assert_eq!(verdict(&proj, &[1.0, 1.0, 1.0, 1.0]), MembershipClass::Interior);
        assert_eq!(verdict(&proj, &[-1.0, 1.0, 1.0, 1.0]), MembershipClass::Interior);
        // sum(lambda) < 0 can never be lifted: sigma_2 ~ R*sum -> -inf.
        let v = membership(&proj, &[-4.0, 1.0, 1.0, 1.0], 1e-9).unwrap();
        assert_eq!(v.class, MembershipClass::Exterior);
        assert!(v.r_capped);
    }

    #[test]
    fn spec_json_schema_round_trips() {
        let spec = ConeSpec::Transform {
            n: 4,
            rho: 1.0,
            base: Box::new(ConeSpec::garding(4, 2)),
        };
        let js = serde_json::to_value(&spec).unwrap();
        assert_eq!(js["kind"], "transform");
        assert_eq!(js["base"]["kind"], "garding");
        assert_eq!(js["base"]["k"], 2);
        let back: ConeSpec = serde_json::from_value(js).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn validation_rejects_malformed_specs() {
        assert!(ConeSpec::garding(1, 1).validate().is_err());
        assert!(ConeSpec::garding(4, 5).validate().is_err());
        assert!(ConeSpec::halfspace(4, 0.0).validate().is_err());
        assert!(ConeSpec::halfspace(4, 1.5).validate().is_err());
        assert!(ConeSpec::Transform { n: 3, rho: 1.0, base: Box::new(ConeSpec::garding(4, 2)) }
            .validate()
            .is_err());
        assert!(ConeSpec::Projection { n: 5, target_dim: 5, base: Box::new(ConeSpec::garding(5, 2)) }
            .validate()
            .is_err());
    }
}
