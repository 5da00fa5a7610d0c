//! Degree-one-homogeneous symmetric functions (root-normalized elementary
//! symmetric polynomials and their quotients) with gradients, the
//! cone-transformed operator built from them, and ellipticity certificates.

pub mod certify;
pub mod transform;

pub use certify::EllipticityCertificate;
pub use transform::TransformedOperator;

use serde::{Deserialize, Serialize};

use crate::cones::{elementary_symmetric, membership, ConeSpec, MembershipClass};
use crate::error::{CclError, Result};
use crate::scalar::{c, lower, Scalar};

/// A concave 1-homogeneous symmetric function together with the open cone
/// it is defined and monotone on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SymmetricFunctionSpec {
    /// sigma_k(lambda)^(1/k)
    SigmaKRoot { k: usize, cone: ConeSpec },
    /// (sigma_k / sigma_l)^(1/(k-l)), k > l
    SigmaQuotientRoot { k: usize, l: usize, cone: ConeSpec },
    /// plain trace
    Sigma1 { cone: ConeSpec },
}

impl SymmetricFunctionSpec {
    pub fn sigma_k_root(n: usize, k: usize) -> Self {
        SymmetricFunctionSpec::SigmaKRoot { k, cone: ConeSpec::garding(n, k) }
    }

    pub fn sigma1(n: usize) -> Self {
        SymmetricFunctionSpec::Sigma1 { cone: ConeSpec::garding(n, 1) }
    }

    pub fn cone(&self) -> &ConeSpec {
        match self {
            SymmetricFunctionSpec::SigmaKRoot { cone, .. }
            | SymmetricFunctionSpec::SigmaQuotientRoot { cone, .. }
            | SymmetricFunctionSpec::Sigma1 { cone } => cone,
        }
    }

    pub fn dimension(&self) -> usize {
        self.cone().dimension()
    }

    pub fn validate(&self) -> Result<()> {
        self.cone().validate()?;
        let n = self.dimension();
        match self {
            SymmetricFunctionSpec::SigmaKRoot { k, .. } => {
                if *k < 1 || *k > n {
                    return Err(CclError::InvalidCone(format!("k = {k} outside 1..={n}")));
                }
            }
            SymmetricFunctionSpec::SigmaQuotientRoot { k, l, .. } => {
                if *l < 1 || k <= l || *k > n {
                    return Err(CclError::InvalidCone(format!(
                        "quotient needs 1 <= l < k <= {n}, got k = {k}, l = {l}"
                    )));
                }
            }
            SymmetricFunctionSpec::Sigma1 { .. } => {}
        }
        Ok(())
    }

    fn check_domain<F: Scalar>(&self, lam: &[F]) -> Result<()> {
        let v = membership(self.cone(), lam, c::<F>(1e-12))?;
        if v.class == MembershipClass::Exterior {
            return Err(CclError::OutsideDomain { margin: lower(v.margin) });
        }
        Ok(())
    }

    /// Value at an interior (or boundary) point of the cone.
    pub fn eval<F: Scalar>(&self, lam: &[F]) -> Result<F> {
        Ok(self.eval_grad(lam)?.0)
    }

    /// Value and gradient. The gradient entries are nonnegative on the cone
    /// and sum to the value's Euler degree share (value = lambda . grad).
    pub fn eval_grad<F: Scalar>(&self, lam: &[F]) -> Result<(F, Vec<F>)> {
        self.validate()?;
        let n = self.dimension();
        if lam.len() != n {
            return Err(CclError::DimensionMismatch { expected: n, got: lam.len() });
        }
        self.check_domain(lam)?;
        match self {
            SymmetricFunctionSpec::Sigma1 { .. } => {
                let s = lam.iter().fold(F::zero(), |a, &x| a + x);
                Ok((s, vec![F::one(); n]))
            }
            SymmetricFunctionSpec::SigmaKRoot { k, .. } => {
                let k = *k;
                if k == 1 {
                    let s = lam.iter().fold(F::zero(), |a, &x| a + x);
                    return Ok((s, vec![F::one(); n]));
                }
                let e = elementary_symmetric(lam, k);
                let sk = e[k];
                if sk <= F::zero() {
                    return Err(CclError::OutsideDomain { margin: lower(sk) });
                }
                let kf = c::<F>(k as f64);
                let f = sk.powf(F::one() / kf);
                let scale = f / (kf * sk);
                let grad = (0..n)
                    .map(|i| {
                        let d = deleted_elementary(lam, i, k - 1);
                        scale * d[k - 1]
                    })
                    .collect();
                Ok((f, grad))
            }
            SymmetricFunctionSpec::SigmaQuotientRoot { k, l, .. } => {
                let (k, l) = (*k, *l);
                let e = elementary_symmetric(lam, k);
                let (sk, sl) = (e[k], e[l]);
                if sk <= F::zero() || sl <= F::zero() {
                    return Err(CclError::OutsideDomain { margin: lower(sk.min(sl)) });
                }
                let p = c::<F>(1.0 / (k - l) as f64);
                let q = sk / sl;
                let f = q.powf(p);
                let scale = p * f / q;
                let grad = (0..n)
                    .map(|i| {
                        let d = deleted_elementary(lam, i, k - 1);
                        let dq = (d[k - 1] * sl - sk * d[l - 1]) / (sl * sl);
                        scale * dq
                    })
                    .collect();
                Ok((f, grad))
            }
        }
    }
}

/// e_j of the vector with entry i removed, rebuilt from the surviving
/// entries. The downdate d_j = e_j - lambda_i d_{j-1} is cheaper but loses
/// a factor |lambda_i| / |lambda_min| of precision per step, enough to flip
/// gradient signs near the boundary when one entry dominates; the rebuild
/// is O(n jmax) and stays at round-off.
fn deleted_elementary<F: Scalar>(lam: &[F], i: usize, jmax: usize) -> Vec<F> {
    let mut d = vec![F::zero(); jmax + 1];
    d[0] = F::one();
    let mut used = 0usize;
    for (idx, &x) in lam.iter().enumerate() {
        if idx == i {
            continue;
        }
        used += 1;
        for j in (1..=jmax.min(used)).rev() {
            d[j] = d[j] + x * d[j - 1];
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigma2_root_at_ones() {
        let f = SymmetricFunctionSpec::sigma_k_root(4, 2);
        let (v, g) = f.eval_grad(&[1.0_f64; 4]).unwrap();
        assert!((v - 6.0_f64.sqrt()).abs() < 1e-14);
        // Each entry is sigma_2^{-1/2}/2 * d_1 = 3/(2 sqrt 6); the Euler
        // identity 4 * g_i = sqrt 6 pins the factor of 2.
        for gi in &g {
            assert!((gi - 3.0 / (2.0 * 6.0_f64.sqrt())).abs() < 1e-14);
        }
    }

    #[test]
    fn quotient_root_at_ones() {
        let f = SymmetricFunctionSpec::SigmaQuotientRoot {
            k: 3,
            l: 1,
            cone: ConeSpec::garding(4, 3),
        };
        let (v, g) = f.eval_grad(&[1.0_f64; 4]).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        for gi in &g {
            assert!((gi - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn euler_identity_on_random_interior_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let specs = [
            SymmetricFunctionSpec::sigma_k_root(5, 3),
            SymmetricFunctionSpec::SigmaQuotientRoot { k: 4, l: 2, cone: ConeSpec::garding(5, 4) },
            SymmetricFunctionSpec::sigma1(5),
        ];
        for f in &specs {
            let mut found = 0;
            while found < 20 {
                let lam: Vec<f64> = (0..5).map(|_| 0.2 + rng.gen::<f64>() * 2.0).collect();
                let Ok((v, g)) = f.eval_grad(&lam) else { continue };
                found += 1;
                let dot: f64 = lam.iter().zip(&g).map(|(a, b)| a * b).sum();
                assert!((dot - v).abs() <= 1e-12 * (1.0 + v.abs()), "{f:?}");
                for gi in &g {
                    assert!(*gi >= 0.0, "{f:?} gradient {gi}");
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let f = SymmetricFunctionSpec::sigma_k_root(4, 3);
        let lam = [1.4_f64, 0.9, 2.0, 0.6];
        let (_, g) = f.eval_grad(&lam).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let mut p = lam;
            p[i] += h;
            let mut m = lam;
            m[i] -= h;
            let fd = (f.eval(&p).unwrap() - f.eval(&m).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "i={i} fd={fd} g={}", g[i]);
        }
    }

    #[test]
    fn gradient_survives_a_dominant_entry() {
        // One entry five orders of magnitude above the rest. The downdate
        // recurrence for the deleted elementaries loses ~ (mu_max/mu_min)^5
        // here and used to flip the sign of the last gradient entry.
        let f = SymmetricFunctionSpec::sigma_k_root(6, 6);
        let mut mu = [1.8181816858874424e-5_f64; 6];
        mu[5] = 0.5000090909084295;
        let (v, g) = f.eval_grad(&mu).unwrap();
        // sigma_n^{1/n} has the closed-form gradient v / (n mu_i).
        for (gi, mi) in g.iter().zip(&mu) {
            let exact = v / (6.0 * mi);
            assert!((gi - exact).abs() <= 1e-12 * exact, "g={gi} exact={exact}");
        }
    }

    #[test]
    fn exterior_points_are_refused() {
        let f = SymmetricFunctionSpec::sigma_k_root(4, 2);
        let err = f.eval(&[-2.0_f64, 0.1, 0.1, 0.1]).unwrap_err();
        assert!(matches!(err, CclError::OutsideDomain { .. }));
    }

    #[test]
    fn serde_layout_is_flat() {
        let f = SymmetricFunctionSpec::SigmaQuotientRoot {
            k: 3,
            l: 1,
            cone: ConeSpec::garding(5, 3),
        };
        let js = serde_json::to_value(&f).unwrap();
        assert_eq!(js["family"], "sigma_quotient_root");
        assert_eq!(js["k"], 3);
        assert_eq!(js["cone"]["kind"], "garding");
        let back: SymmetricFunctionSpec = serde_json::from_value(js).unwrap();
        assert_eq!(back, f);
    }
}
