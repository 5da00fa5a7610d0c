//! Curvature of the model backgrounds: closed forms for space forms and a
//! finite-difference Christoffel pipeline for conformally flat box metrics.

use crate::error::{CclError, Result};
use crate::geom::fields::FieldSpec;
use crate::geom::grid::{Grid, NeighborTable, ScalarField, SymTensorField, NO_NEIGHBOR};
use crate::geom::Manifold;
use crate::linalg::{packed_index, packed_len, SymMat};
use crate::scalar::{c, Scalar};

/// Metric, Ricci, scalar curvature, and the trace-adjusted Ricci combination
/// A = (Ric - R/(2(n-1)) g)/(n-2) on every grid node, all with lower indices
/// in chart coordinates.
#[derive(Clone, Debug)]
pub struct CurvatureBundle<F> {
    pub grid: Grid,
    pub n: usize,
    pub metric: SymTensorField<F>,
    pub ric: SymTensorField<F>,
    pub scal: ScalarField<F>,
    pub schouten: SymTensorField<F>,
    /// Constant sectional curvature when the background is a space form.
    pub space_form: Option<f64>,
}

impl<F: Scalar> CurvatureBundle<F> {
    /// alpha/(n-2) * (Ric - tau/(2(n-1)) R g).
    pub fn modified_schouten(&self, tau: f64, alpha: f64) -> SymTensorField<F> {
        let n = self.n;
        let ka = c::<F>(alpha / (n as f64 - 2.0));
        let kt = c::<F>(tau / (2.0 * (n as f64 - 1.0)));
        SymTensorField::from_fn(self.grid.clone(), |m| {
            let g = self.metric.mat(m);
            let r = self.ric.mat(m);
            r.add(&g.scale(-kt * self.scal.get(m))).scale(ka)
        })
    }

    /// Ric - (R/2) g.
    pub fn einstein(&self) -> SymTensorField<F> {
        let half = c::<F>(0.5);
        SymTensorField::from_fn(self.grid.clone(), |m| {
            let g = self.metric.mat(m);
            self.ric.mat(m).add(&g.scale(-half * self.scal.get(m)))
        })
    }
}

/// Trace algebra at a single point, taking S = -A in an orthonormal frame
/// (A the trace-adjusted Ricci combination above).
#[derive(Clone, Debug)]
pub struct SchoutenAlgebra<F> {
    pub ric: SymMat<F>,
    pub scal: F,
    pub einstein: SymMat<F>,
    pub modified: SymMat<F>,
}

pub fn schouten_algebra<F: Scalar>(s: &SymMat<F>, tau: f64, alpha: f64) -> SchoutenAlgebra<F> {
    let n = s.n;
    let nf = n as f64;
    let tr_s = s.trace();
    // A = -S, so tr A = -tr S.
    let mut ric = s.scale(-c::<F>(nf - 2.0));
    for i in 0..n {
        ric.add_to(i, i, -tr_s);
    }
    let scal = -c::<F>(2.0 * (nf - 1.0)) * tr_s;
    let mut einstein = s.scale(-c::<F>(nf - 2.0));
    for i in 0..n {
        einstein.add_to(i, i, c::<F>(nf - 2.0) * tr_s);
    }
    let mut modified = s.scale(-c::<F>(alpha));
    for i in 0..n {
        modified.add_to(i, i, -c::<F>(alpha * (1.0 - tau) / (nf - 2.0)) * tr_s);
    }
    SchoutenAlgebra { ric, scal, einstein, modified }
}

pub fn curvature<F: Scalar>(manifold: &Manifold) -> Result<CurvatureBundle<F>> {
    manifold.validate()?;
    match manifold {
        Manifold::FlatTorus { .. } | Manifold::Slab { .. } => {
            space_form_bundle(manifold.grid()?, manifold.dim(), 0.0)
        }
        Manifold::SphereChart { radius, .. } => {
            space_form_bundle(manifold.grid()?, manifold.dim(), 1.0 / (radius * radius))
        }
        Manifold::HyperbolicChart { .. } => {
            space_form_bundle(manifold.grid()?, manifold.dim(), -1.0)
        }
        Manifold::ConformalTorus { phi, .. } => conformal_torus_bundle(manifold.grid()?, phi),
        Manifold::RadialBall { .. } => Err(CclError::InvalidProblem(
            "radial ball curvature lives in the radial solver".into(),
        )),
    }
}

/// Orthonormal-frame constants for constant sectional curvature s:
/// Ric = (n-1)s g, R = n(n-1)s, A = (s/2) g.
fn space_form_bundle<F: Scalar>(grid: Grid, n: usize, s: f64) -> Result<CurvatureBundle<F>> {
    let nf = n as f64;
    let eye = SymMat::from_diag(&vec![F::one(); n]);
    let metric = SymTensorField::from_fn(grid.clone(), |_| eye.clone());
    let ric = SymTensorField::from_fn(grid.clone(), |_| eye.scale(c::<F>((nf - 1.0) * s)));
    let mut scal = ScalarField::zeros(grid.clone());
    for i in 0..grid.total_nodes() {
        scal.set(i, c::<F>(nf * (nf - 1.0) * s));
    }
    let schouten = SymTensorField::from_fn(grid.clone(), |_| eye.scale(c::<F>(0.5 * s)));
    Ok(CurvatureBundle { grid, n, metric, ric, scal, schouten, space_form: Some(s) })
}

fn conformal_torus_bundle<F: Scalar>(grid: Grid, phi: &FieldSpec) -> Result<CurvatureBundle<F>> {
    let n = grid.dim();
    let phi_field: ScalarField<F> = phi.realize(&grid)?;
    let two = F::one() + F::one();
    let metric = SymTensorField::from_fn(grid.clone(), |m| {
        let w = (two * phi_field.get(m)).exp();
        SymMat::from_diag(&vec![w; n])
    });
    let box_metric = BoxMetric::build(grid.clone(), metric)?;
    let ric = box_metric.ricci()?;
    let mut scal = ScalarField::zeros(grid.clone());
    for m in 0..grid.total_nodes() {
        let gi = box_metric.ginv.mat(m);
        let rm = ric.mat(m);
        let mut s = F::zero();
        for i in 0..n {
            for j in 0..n {
                s = s + gi.get(i, j) * rm.get(i, j);
            }
        }
        scal.set(m, s);
    }
    let kn = c::<F>(1.0 / (n as f64 - 2.0));
    let kt = c::<F>(1.0 / (2.0 * (n as f64 - 1.0)));
    let schouten = SymTensorField::from_fn(grid.clone(), |m| {
        let g = box_metric.g.mat(m);
        ric.mat(m).add(&g.scale(-kt * scal.get(m))).scale(kn)
    });
    Ok(CurvatureBundle {
        grid,
        n,
        metric: box_metric.g,
        ric,
        scal,
        schouten,
        space_form: None,
    })
}

/// Christoffel symbols of a box-grid metric, from 4th-order central first
/// derivatives of the metric components. Shared by the Ricci assembly and
/// the Riemann components used in the sectional comparison.
pub(crate) struct BoxMetric<F> {
    pub grid: Grid,
    pub n: usize,
    pub tbl: NeighborTable,
    pub g: SymTensorField<F>,
    pub ginv: SymTensorField<F>,
    /// gamma[node*n*p + k*p + packed(i,j)] = Gamma^k_ij
    gamma: Vec<F>,
}

impl<F: Scalar> BoxMetric<F> {
    pub fn build(grid: Grid, g: SymTensorField<F>) -> Result<Self> {
        let n = grid.dim();
        if grid.min_nodes_per_axis() < 8 {
            return Err(CclError::GridTooCoarse(
                "curvature stencils need at least 8 nodes per axis".into(),
            ));
        }
        let p = packed_len(n);
        let total = grid.total_nodes();
        let tbl = NeighborTable::build(&grid);
        // dg[k] holds the axis-k partials of every metric component.
        let mut dg: Vec<SymTensorField<F>> = Vec::with_capacity(n);
        let gslice = g.as_slice();
        for k in 0..n {
            let h = c::<F>(grid.spacing(k));
            let mut out = SymTensorField::zeros(grid.clone());
            for m in 0..total {
                let mut mat = SymMat::zeros(n);
                for i in 0..n {
                    for j in i..n {
                        let cidx = packed_index(n, i, j);
                        let v = d1_o4_of(&tbl, h, k, m, |node| gslice[node * p + cidx])?;
                        mat.set(i, j, v);
                    }
                }
                out.set_mat(m, &mat);
            }
            dg.push(out);
        }
        let mut ginv = SymTensorField::zeros(grid.clone());
        let mut gamma = vec![F::zero(); total * n * p];
        let half = c::<F>(0.5);
        for m in 0..total {
            let inv = g.mat(m).spd_inverse()?;
            ginv.set_mat(m, &inv);
            for k in 0..n {
                for i in 0..n {
                    for j in i..n {
                        let mut s = F::zero();
                        for l in 0..n {
                            s = s + inv.get(k, l)
                                * (dg[i].mat_get(m, j, l) + dg[j].mat_get(m, i, l)
                                    - dg[l].mat_get(m, i, j));
                        }
                        gamma[m * n * p + k * p + packed_index(n, i, j)] = half * s;
                    }
                }
            }
        }
        Ok(BoxMetric { grid, n, tbl, g, ginv, gamma })
    }

    #[inline]
    pub fn gamma_at(&self, node: usize, k: usize, i: usize, j: usize) -> F {
        let p = packed_len(self.n);
        self.gamma[node * self.n * p + k * p + packed_index(self.n, i, j)]
    }

    /// Ric_ij = d_k Gamma^k_ij - d_(j Gamma^k_i)k + Gamma^k_kl Gamma^l_ij
    ///        - Gamma^k_jl Gamma^l_ik, with the second term symmetrized.
    pub fn ricci(&self) -> Result<SymTensorField<F>> {
        let n = self.n;
        let half = c::<F>(0.5);
        let contracted = |node: usize, i: usize| -> F {
            let mut s = F::zero();
            for k in 0..n {
                s = s + self.gamma_at(node, k, i, k);
            }
            s
        };
        let mut out = SymTensorField::zeros(self.grid.clone());
        for m in 0..self.grid.total_nodes() {
            let mut mat = SymMat::zeros(n);
            for i in 0..n {
                for j in i..n {
                    let mut term1 = F::zero();
                    for k in 0..n {
                        let h = c::<F>(self.grid.spacing(k));
                        term1 = term1
                            + d1_o4_of(&self.tbl, h, k, m, |node| self.gamma_at(node, k, i, j))?;
                    }
                    let hj = c::<F>(self.grid.spacing(j));
                    let hi = c::<F>(self.grid.spacing(i));
                    let term2 = half
                        * (d1_o4_of(&self.tbl, hj, j, m, |node| contracted(node, i))?
                            + d1_o4_of(&self.tbl, hi, i, m, |node| contracted(node, j))?);
                    let mut quad1 = F::zero();
                    for l in 0..n {
                        quad1 = quad1 + contracted(m, l) * self.gamma_at(m, l, i, j);
                    }
                    let mut quad2 = F::zero();
                    for k in 0..n {
                        for l in 0..n {
                            quad2 = quad2 + self.gamma_at(m, k, j, l) * self.gamma_at(m, l, i, k);
                        }
                    }
                    mat.set(i, j, term1 - term2 + quad1 - quad2);
                }
            }
            out.set_mat(m, &mat);
        }
        Ok(out)
    }

    /// Fully lowered curvature component R_{rho sigma mu nu}.
    pub fn riemann_lower(
        &self,
        node: usize,
        rho: usize,
        sigma: usize,
        mu: usize,
        nu: usize,
    ) -> Result<F> {
        let n = self.n;
        let g = self.g.mat(node);
        let mut out = F::zero();
        for alpha in 0..n {
            let hmu = c::<F>(self.grid.spacing(mu));
            let hnu = c::<F>(self.grid.spacing(nu));
            let d_mu = d1_o4_of(&self.tbl, hmu, mu, node, |q| self.gamma_at(q, alpha, nu, sigma))?;
            let d_nu = d1_o4_of(&self.tbl, hnu, nu, node, |q| self.gamma_at(q, alpha, mu, sigma))?;
            let mut quad = F::zero();
            for lam in 0..n {
                quad = quad + self.gamma_at(node, alpha, mu, lam) * self.gamma_at(node, lam, nu, sigma)
                    - self.gamma_at(node, alpha, nu, lam) * self.gamma_at(node, lam, mu, sigma);
            }
            out = out + g.get(rho, alpha) * (d_mu - d_nu + quad);
        }
        Ok(out)
    }
}

/// Dimension-3 comparison of the Einstein tensor in the plane normal
/// against the negated sectional curvature of a coordinate plane. The two
/// sides come from independent discrete pipelines (Ricci contraction vs a
/// single Riemann component), so their gap measures stencil error only.
pub fn sectional_vs_einstein<F: Scalar>(
    manifold: &Manifold,
    plane: (usize, usize),
) -> Result<(ScalarField<F>, ScalarField<F>)> {
    let n = manifold.dim();
    if n != 3 {
        return Err(CclError::DimensionMismatch { expected: 3, got: n });
    }
    let (a, b) = plane;
    if a == b || a >= 3 || b >= 3 {
        return Err(CclError::InvalidProblem(format!("bad coordinate plane ({a},{b})")));
    }
    let normal = 3 - a - b;
    match manifold {
        Manifold::ConformalTorus { phi, .. } => {
            let grid = manifold.grid()?;
            let phi_field: ScalarField<F> = phi.realize(&grid)?;
            let two = F::one() + F::one();
            let metric = SymTensorField::from_fn(grid.clone(), |m| {
                let w = (two * phi_field.get(m)).exp();
                SymMat::from_diag(&vec![w; 3])
            });
            let bm = BoxMetric::build(grid.clone(), metric)?;
            let ric = bm.ricci()?;
            let mut g_normal = ScalarField::zeros(grid.clone());
            let mut neg_sec = ScalarField::zeros(grid.clone());
            for m in 0..grid.total_nodes() {
                let g = bm.g.mat(m);
                let rm = ric.mat(m);
                let gi = bm.ginv.mat(m);
                let mut scal = F::zero();
                for i in 0..3 {
                    for j in 0..3 {
                        scal = scal + gi.get(i, j) * rm.get(i, j);
                    }
                }
                let half = c::<F>(0.5);
                let e_nn = (rm.get(normal, normal) - half * scal * g.get(normal, normal))
                    / g.get(normal, normal);
                g_normal.set(m, e_nn);
                let r_abab = bm.riemann_lower(m, a, b, a, b)?;
                let denom = g.get(a, a) * g.get(b, b) - g.get(a, b) * g.get(a, b);
                neg_sec.set(m, -r_abab / denom);
            }
            Ok((g_normal, neg_sec))
        }
        _ => {
            let bundle = curvature::<F>(manifold)?;
            let s = bundle.space_form.ok_or_else(|| {
                CclError::InvalidProblem("sectional comparison needs a torus or space form".into())
            })?;
            let grid = bundle.grid.clone();
            let mut g_normal = ScalarField::zeros(grid.clone());
            let mut neg_sec = ScalarField::zeros(grid);
            for m in 0..g_normal.grid().total_nodes() {
                g_normal.set(m, c::<F>(-s));
                neg_sec.set(m, c::<F>(-s));
            }
            Ok((g_normal, neg_sec))
        }
    }
}

/// 4th-order central first derivative of an arbitrary node-indexed quantity.
fn d1_o4_of<F: Scalar>(
    tbl: &NeighborTable,
    h: F,
    axis: usize,
    node: usize,
    f: impl Fn(usize) -> F,
) -> Result<F> {
    let p1 = tbl.plus[axis][node];
    let m1 = tbl.minus[axis][node];
    if p1 == NO_NEIGHBOR || m1 == NO_NEIGHBOR {
        return Err(CclError::GridTooCoarse("stencil leaves a bounded axis".into()));
    }
    let p2 = tbl.plus[axis][p1];
    let m2 = tbl.minus[axis][m1];
    if p2 == NO_NEIGHBOR || m2 == NO_NEIGHBOR {
        return Err(CclError::GridTooCoarse("stencil leaves a bounded axis".into()));
    }
    let eight = c::<F>(8.0);
    let twelve = c::<F>(12.0);
    Ok((eight * (f(p1) - f(m1)) - (f(p2) - f(m2))) / (twelve * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::fields::FieldSpec;

    #[test]
    fn space_form_constants() {
        let sphere = Manifold::SphereChart { n: 4, grid: vec![8], radius: 1.0 };
        let b: CurvatureBundle<f64> = curvature(&sphere).unwrap();
        let m = 17;
        for i in 0..4 {
            assert!((b.ric.mat(m).get(i, i) - 3.0).abs() < 1e-12);
            assert!((b.schouten.mat(m).get(i, i) - 0.5).abs() < 1e-12);
        }
        assert!((b.scal.get(m) - 12.0).abs() < 1e-12);
        let mod31 = b.modified_schouten(3.0, 1.0);
        assert!((mod31.mat(m).get(0, 0) + 1.5).abs() < 1e-12);

        let hyp = Manifold::HyperbolicChart { n: 3, grid: vec![8] };
        let b: CurvatureBundle<f64> = curvature(&hyp).unwrap();
        assert!((b.schouten.mat(0).get(1, 1) + 0.5).abs() < 1e-12);
        let mod0m1 = b.modified_schouten(0.0, -1.0);
        assert!((mod0m1.mat(0).get(2, 2) - 2.0).abs() < 1e-12);
        let g_e = b.einstein();
        assert!((g_e.mat(0).get(0, 0) - 1.0).abs() < 1e-12);

        let flat = Manifold::flat_torus(3, 8);
        let b: CurvatureBundle<f64> = curvature(&flat).unwrap();
        assert_eq!(b.ric.sup_norm(), 0.0);
        assert_eq!(b.modified_schouten(2.5, 1.0).sup_norm(), 0.0);
    }

    fn conformally_flat_ric_oracle(phi: &FieldSpec, x: &[f64]) -> SymMat<f64> {
        let n = x.len();
        let g = phi.grad(x).unwrap();
        let h = phi.hess(x).unwrap();
        let lap: f64 = (0..n).map(|i| h.get(i, i)).sum();
        let grad2: f64 = g.iter().map(|v| v * v).sum();
        let mut out = SymMat::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut v = -(n as f64 - 2.0) * (h.get(i, j) - g[i] * g[j]);
                if i == j {
                    v -= lap + (n as f64 - 2.0) * grad2;
                }
                out.set(i, j, v);
            }
        }
        out
    }

    #[test]
    fn conformal_torus_ricci_matches_the_closed_form_at_fourth_order() {
        let phi = FieldSpec::Sum {
            terms: vec![
                FieldSpec::sin_axis(0, 0.15, 1.0, 0.0),
                FieldSpec::cos_axis(1, 0.1, 1.0, 0.4),
                FieldSpec::cos_axis(2, 0.08, 1.0, 0.0),
            ],
        };
        let mut errs = Vec::new();
        for nodes in [12usize, 24] {
            let m = Manifold::conformal_torus(3, nodes, phi.clone());
            let b: CurvatureBundle<f64> = curvature(&m).unwrap();
            let mut worst: f64 = 0.0;
            for node in 0..b.grid.total_nodes() {
                let x = b.grid.point(node);
                let want = conformally_flat_ric_oracle(&phi, &x);
                let got = b.ric.mat(node);
                for i in 0..3 {
                    for j in i..3 {
                        worst = worst.max((want.get(i, j) - got.get(i, j)).abs());
                    }
                }
            }
            errs.push(worst);
        }
        let order = (errs[0] / errs[1]).ln() / (24.0f64 / 12.0).ln();
        assert!(order > 3.5, "observed order {order} from errors {errs:?}");
        assert!(errs[1] < 1e-3, "coarse error too large: {errs:?}");
    }

    #[test]
    fn curvature_refuses_coarse_grids() {
        let m = Manifold::conformal_torus(3, 6, FieldSpec::constant(0.0));
        assert!(matches!(curvature::<f64>(&m), Err(CclError::GridTooCoarse(_))));
    }

    #[test]
    fn trace_algebra_goldens() {
        let s = SymMat::<f64>::from_diag(&[1.0, 2.0, 3.0]);
        let alg = schouten_algebra(&s, 1.0, 1.0);
        let eigs = alg.einstein.eigenvalues();
        assert!((eigs[0] - 3.0).abs() < 1e-13);
        assert!((eigs[1] - 4.0).abs() < 1e-13);
        assert!((eigs[2] - 5.0).abs() < 1e-13);
        let zero = schouten_algebra(&SymMat::<f64>::zeros(4), 2.0, -1.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(zero.einstein.get(i, j), 0.0);
            }
        }
        assert_eq!(zero.scal, 0.0);
    }

    #[test]
    fn einstein_spectrum_is_the_complementary_trace() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = 3 + (rng.gen::<u64>() % 4) as usize;
            let mut s = SymMat::<f64>::zeros(n);
            for i in 0..n {
                for j in i..n {
                    s.set(i, j, rng.gen_range(-2.0..2.0));
                }
            }
            let (svals, svecs) = s.eigen();
            let tr: f64 = svals.iter().sum();
            let g = schouten_algebra(&s, 1.5, 1.0).einstein;
            // Same eigenvectors; eigenvalue i is (n-2)(tr S - s_i).
            for k in 0..n {
                let v = &svecs[k * n..(k + 1) * n];
                let want = (n as f64 - 2.0) * (tr - svals[k]);
                for i in 0..n {
                    let mut gv = 0.0;
                    for j in 0..n {
                        gv += g.get(i, j) * v[j];
                    }
                    assert!((gv - want * v[i]).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn sectional_comparison_on_space_forms_and_tori() {
        let hyp = Manifold::HyperbolicChart { n: 3, grid: vec![8] };
        let (g_nn, neg_sec) = sectional_vs_einstein::<f64>(&hyp, (0, 1)).unwrap();
        assert!((g_nn.get(0) - 1.0).abs() < 1e-14);
        assert!((neg_sec.get(0) - 1.0).abs() < 1e-14);
        let sph = Manifold::SphereChart { n: 3, grid: vec![8], radius: 1.0 };
        let (g_nn, neg_sec) = sectional_vs_einstein::<f64>(&sph, (1, 2)).unwrap();
        assert!((g_nn.get(5) + 1.0).abs() < 1e-14);
        assert!((neg_sec.get(5) + 1.0).abs() < 1e-14);

        // For a diagonal 3d metric the normal Einstein entry is an algebraic
        // combination of the same three plane components the direct Riemann
        // evaluation uses, so the two pipelines agree to round-off, not just
        // to stencil order. Pin that consistency on a two-axis profile.
        let phi = FieldSpec::Sum {
            terms: vec![
                FieldSpec::sin_axis(0, 0.06, 1.0, 0.2),
                FieldSpec::cos_axis(1, 0.05, 1.0, 0.0),
            ],
        };
        for nodes in [12usize, 18] {
            let m = Manifold::conformal_torus(3, nodes, phi.clone());
            let (g_nn, neg_sec) = sectional_vs_einstein::<f64>(&m, (0, 1)).unwrap();
            assert!(g_nn.max_abs_diff(&neg_sec) < 1e-13);
        }
        assert!(sectional_vs_einstein::<f64>(&Manifold::flat_torus(4, 8), (0, 1)).is_err());
    }
}
