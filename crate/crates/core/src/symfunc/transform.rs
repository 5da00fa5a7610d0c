//! Operator obtained by precomposing a symmetric function with the
//! trace-preserving linear cone map; this is what turns a degenerate
//! operator into a uniformly elliptic one when rho stays below the scale.

use crate::cones::invariants::{compute_varrho, cone_type, transform_cone};
use crate::cones::{mu_of_lambda, ConeSpec, ConeType};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::symfunc::SymmetricFunctionSpec;

/// f composed with mu(lambda); its natural domain is the pulled-back cone.
#[derive(Clone, Debug)]
pub struct TransformedOperator {
    f: SymmetricFunctionSpec,
    rho: f64,
    domain: ConeSpec,
    varrho_base: f64,
    base_type: ConeType,
}

impl TransformedOperator {
    /// Gate on rho (nonzero, at most the base scale, below the dimension)
    /// and precompute the pulled-back domain cone.
    pub fn new(f: SymmetricFunctionSpec, rho: f64) -> Result<Self> {
        f.validate()?;
        let base = f.cone().clone();
        let varrho_base = compute_varrho(&base)?;
        let base_type = cone_type(&base)?;
        let domain = transform_cone(base, rho)?;
        Ok(TransformedOperator { f, rho, domain, varrho_base, base_type })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn domain(&self) -> &ConeSpec {
        &self.domain
    }

    pub fn inner(&self) -> &SymmetricFunctionSpec {
        &self.f
    }

    pub fn varrho_base(&self) -> f64 {
        self.varrho_base
    }

    pub fn base_type(&self) -> ConeType {
        self.base_type
    }

    pub fn dimension(&self) -> usize {
        self.f.dimension()
    }

    /// Value at lambda: f(mu(lambda)).
    pub fn eval<F: Scalar>(&self, lam: &[F]) -> Result<F> {
        self.f.eval(&mu_of_lambda(self.rho, lam))
    }

    /// Value and lambda-gradient. Because the map matrix is symmetric with
    /// rows of the same form, the chain rule is the map itself applied to
    /// the mu-gradient; in particular the gradient sum is preserved.
    pub fn eval_grad<F: Scalar>(&self, lam: &[F]) -> Result<(F, Vec<F>)> {
        let mu = mu_of_lambda(self.rho, lam);
        let (v, gmu) = self.f.eval_grad(&mu)?;
        Ok((v, mu_of_lambda(self.rho, &gmu)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symfunc::SymmetricFunctionSpec as Fs;

    #[test]
    fn gate_passes_and_fails_on_the_scale() {
        let f = Fs::sigma_k_root(4, 2); // scale 2
        assert!(TransformedOperator::new(f.clone(), 1.0).is_ok());
        assert!(TransformedOperator::new(f.clone(), 2.0).is_ok());
        assert!(TransformedOperator::new(f.clone(), 2.5).is_err());
        assert!(TransformedOperator::new(f, 0.0).is_err());
    }

    #[test]
    fn diagonal_points_are_fixed() {
        let op = TransformedOperator::new(Fs::sigma_k_root(4, 2), 1.0).unwrap();
        let v = op.eval(&[2.0_f64; 4]).unwrap();
        assert!((v - 2.0 * 6.0_f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn gradient_matches_finite_differences_through_the_map() {
        let op = TransformedOperator::new(Fs::sigma_k_root(4, 2), 1.5).unwrap();
        let lam = [1.2_f64, 0.8, 1.1, 0.4];
        let (_, g) = op.eval_grad(&lam).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let mut p = lam;
            p[i] += h;
            let mut m = lam;
            m[i] -= h;
            let fd = (op.eval(&p).unwrap() - op.eval(&m).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "i={i} fd={fd} g={}", g[i]);
        }
    }

    #[test]
    fn gradient_sum_is_preserved_by_the_chain_rule() {
        let op = TransformedOperator::new(Fs::sigma_k_root(5, 3), 1.0).unwrap();
        let lam = [1.0_f64, 1.3, 0.8, 1.1, 0.9];
        let (_, g) = op.eval_grad(&lam).unwrap();
        let mu = mu_of_lambda(op.rho(), &lam);
        let (_, gmu) = op.inner().eval_grad(&mu).unwrap();
        let a: f64 = g.iter().sum();
        let b: f64 = gmu.iter().sum();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn negative_rho_widens_the_domain() {
        let f = Fs::sigma_k_root(4, 2);
        let lam = [2.0_f64, 2.0, 2.0, -2.4];
        // sigma_2 = -2.4 < 0: outside the plain domain.
        assert!(f.eval(&lam).is_err());
        // mu = (1.3, 1.3, 1.3, -1/6) has sigma_2 = 4.42 > 0: inside after
        // the rho = -2 pullback.
        let op = TransformedOperator::new(f, -2.0).unwrap();
        assert!(op.eval(&lam).is_ok());
    }
}
