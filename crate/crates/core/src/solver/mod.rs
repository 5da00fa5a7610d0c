//! Damped-Newton solver for the reduced curvature-prescription equation
//! F(u) = f(lambda(W[u])) - c psi e^{2u} on flat periodic boxes and slabs,
//! with W[u] = hess(u) + |grad u|^2 g / 2 - du x du - A_g, plus the radial
//! continuation path on the punctured ball.
//!
//! Every function family here is 1-homogeneous, so the conformal factor
//! enters the right-hand side as e^{2u} exactly.

pub mod newton;
pub mod radial;

pub use newton::{solve_newton, IterRecord, NewtonOptions, SolveReport};
pub use radial::{solve_radial, RadialOptions, RadialRun, RadialStage};

use serde::{Deserialize, Serialize};

use crate::cones::invariants::{compute_varrho, cone_type};
use crate::cones::{membership, ConeSpec, ConeType, MembershipClass};
use crate::error::{CclError, Result};
use crate::geom::conformal::{base_geometry, BaseGeometry, ConformalFactor, ReductionConstants};
use crate::geom::fields::FieldSpec;
use crate::geom::grid::ScalarField;
use crate::geom::grid::SymTensorField;
use crate::geom::Manifold;
use crate::linalg::SymMat;
use crate::scalar::{c, lower, Scalar};
use crate::symfunc::{SymmetricFunctionSpec, TransformedOperator};

/// Right-hand side density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiSpec {
    Constant { value: f64 },
    /// psi chosen so the stencil-level system is solved exactly by the
    /// target field; recovery to round-off is the oracle.
    ManufacturedDiscrete { u_star: FieldSpec },
    /// psi from exact derivatives of the target; the solver's recovery
    /// error is then the discretization error, which order studies measure.
    ManufacturedAnalytic { u_star: FieldSpec },
    GridFile { path: String },
}

/// Full problem statement: geometry, function family, curvature parameters,
/// density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub manifold: Manifold,
    pub f: SymmetricFunctionSpec,
    pub tau: f64,
    pub alpha: f64,
    pub psi: PsiSpec,
}

/// Operator the grid solver actually evaluates after parameter resolution.
pub enum SolveOperator {
    /// tau != 1: the function composed with the trace-preserving cone map.
    Reduced(TransformedOperator),
    /// tau = 1, alpha = -1 on a type-2 cone: the function unchanged.
    Direct(SymmetricFunctionSpec),
}

impl SolveOperator {
    pub fn domain(&self) -> &ConeSpec {
        match self {
            SolveOperator::Reduced(op) => op.domain(),
            SolveOperator::Direct(f) => f.cone(),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            SolveOperator::Reduced(op) => op.dimension(),
            SolveOperator::Direct(f) => f.dimension(),
        }
    }

    /// The trace family is linear, globally defined, and needs no
    /// eigenvalue split; the solver treats it as the semilinear case.
    pub fn is_trace(&self) -> bool {
        let inner = match self {
            SolveOperator::Reduced(op) => op.inner(),
            SolveOperator::Direct(f) => f,
        };
        matches!(inner, SymmetricFunctionSpec::Sigma1 { .. })
    }

    pub fn eval_grad<F: Scalar>(&self, lam: &[F]) -> Result<(F, Vec<F>)> {
        match self {
            SolveOperator::Reduced(op) => op.eval_grad(lam),
            SolveOperator::Direct(f) => f.eval_grad(lam),
        }
    }
}

/// State at one iterate: derivative caches, residual, frozen linearization
/// data, and the ellipticity monitors.
pub struct SolveState<F> {
    pub caches: ConformalFactor<F>,
    pub res: ScalarField<F>,
    pub sup_res: f64,
    /// sup |c psi e^{2u}|; scales the convergence tolerance.
    pub rhs_sup: f64,
    /// Frozen derivative of the operator with respect to the Hessian.
    pub m: SymTensorField<F>,
    /// Zeroth-order Jacobian coefficient -2 c psi e^{2u}.
    pub z: Vec<F>,
    /// min / max over nodes and directions of f_i / sum_j f_j.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Smallest directional derivative seen at any node.
    pub min_direction: f64,
    pub worst_margin: f64,
    pub worst_node: usize,
    pub interior_all: bool,
}

/// A problem bound to its grid: gates checked, density realized, Dirichlet
/// mask frozen.
pub struct ReducedProblem<F> {
    pub spec: ProblemSpec,
    pub geo: BaseGeometry<F>,
    pub op: SolveOperator,
    /// Prefactor multiplying psi; 1 on the direct path.
    pub c: f64,
    pub psi: ScalarField<F>,
    /// Manufactured target when the density came from one.
    pub target: Option<ScalarField<F>>,
    /// False at Dirichlet-pinned boundary nodes.
    pub active: Vec<bool>,
    /// Values held at pinned nodes (target restriction or zero).
    pub boundary: ScalarField<F>,
    pub warnings: Vec<String>,
}

pub const MEMBERSHIP_TOL: f64 = 1e-11;

impl<F: Scalar> ReducedProblem<F> {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        spec.f.validate()?;
        let n = spec.manifold.dim();
        if spec.f.dimension() != n {
            return Err(CclError::DimensionMismatch { expected: n, got: spec.f.dimension() });
        }
        if !spec.manifold.is_flat_background() {
            return Err(CclError::InvalidProblem(
                "grid solves need a flat background (periodic box or slab); \
                 warped backgrounds are classification-only"
                    .into(),
            ));
        }
        if spec.alpha != 1.0 && spec.alpha != -1.0 {
            return Err(CclError::InvalidProblem(format!(
                "alpha must be +1 or -1, got {}",
                spec.alpha
            )));
        }
        let geo: BaseGeometry<F> = base_geometry(&spec.manifold)?;
        let varrho_cone = compute_varrho(spec.f.cone())?;
        let nf = n as f64;
        let (op, cval) = if spec.tau == 1.0 {
            if spec.alpha != -1.0 {
                return Err(CclError::InvalidProblem(
                    "tau = 1 with alpha = +1 has no elliptic route".into(),
                ));
            }
            if cone_type(spec.f.cone())? != ConeType::Type2 {
                return Err(CclError::InvalidProblem(
                    "the tau = 1 direct path needs a type-2 cone".into(),
                ));
            }
            (SolveOperator::Direct(spec.f.clone()), 1.0)
        } else {
            let sharp = if spec.alpha < 0.0 {
                spec.tau < 1.0
            } else {
                spec.tau > 1.0 + (nf - 2.0) / varrho_cone
            };
            if !sharp {
                return Err(CclError::InvalidProblem(format!(
                    "(tau, alpha) = ({}, {}) fails the sharp ellipticity gate for a cone of scale {varrho_cone}",
                    spec.tau, spec.alpha
                )));
            }
            let k = ReductionConstants::new(n, spec.tau, spec.alpha)?;
            let cval = k.prefactor(1.0)?;
            if cval <= 0.0 {
                return Err(CclError::InvariantViolation(format!(
                    "sharp gate passed but the prefactor {cval} is not positive"
                )));
            }
            (SolveOperator::Reduced(TransformedOperator::new(spec.f.clone(), k.varrho)?), cval)
        };

        let total = geo.grid.total_nodes();
        let active: Vec<bool> = (0..total).map(|m| !geo.grid.on_boundary(m)).collect();

        let mut warnings = Vec::new();
        let (psi, target) = realize_psi(&spec, &geo, &op, cval, &mut warnings)?;
        if !op.is_trace() {
            for m in 0..total {
                if lower(psi.get(m)) <= 0.0 {
                    return Err(CclError::InvalidProblem(format!(
                        "density must be positive everywhere; {} at node {:?}",
                        lower(psi.get(m)),
                        geo.grid.multi(m)
                    )));
                }
            }
        } else if (0..total).any(|m| lower(psi.get(m)) <= 0.0) {
            warnings.push(
                "density is not positive everywhere; the trace family solves the \
                 semilinear equation regardless, but the solution metric cannot be \
                 cone-admissible"
                    .into(),
            );
        }

        let mut boundary = ScalarField::zeros(geo.grid.clone());
        if let Some(t) = &target {
            for m in 0..total {
                if !active[m] {
                    boundary.set(m, t.get(m));
                }
            }
        }
        Ok(ReducedProblem { spec, geo, op, c: cval, psi, target, active, boundary, warnings })
    }

    /// Zero field with the Dirichlet values imposed.
    pub fn initial_guess(&self) -> ScalarField<F> {
        let mut u = ScalarField::zeros(self.geo.grid.clone());
        for m in 0..self.geo.grid.total_nodes() {
            if !self.active[m] {
                u.set(m, self.boundary.get(m));
            }
        }
        u
    }

    /// W[u] at one node from the derivative caches.
    fn w_at(&self, caches: &ConformalFactor<F>, m: usize) -> SymMat<F> {
        w_matrix(caches, &self.geo, m)
    }

    pub fn eval_state(&self, u: &ScalarField<F>) -> Result<SolveState<F>> {
        self.eval_state_scaled(u, 1.0)
    }

    /// State with the density scaled by a constant factor (the scaling used
    /// by the shift-homogeneity check).
    pub fn eval_state_scaled(&self, u: &ScalarField<F>, psi_factor: f64) -> Result<SolveState<F>> {
        let grid = &self.geo.grid;
        let n = self.geo.n;
        let total = grid.total_nodes();
        if u.grid() != grid {
            return Err(CclError::DimensionMismatch {
                expected: total,
                got: u.grid().total_nodes(),
            });
        }
        let caches = ConformalFactor::from_field(u.clone())?;
        let mut res = ScalarField::zeros(grid.clone());
        let mut mfield = SymTensorField::zeros(grid.clone());
        let mut z = vec![F::zero(); total];
        let cf = c::<F>(self.c * psi_factor);
        let two = c::<F>(2.0);
        let mut sup_res = 0.0f64;
        let mut rhs_sup = 0.0f64;
        let mut min_ratio = f64::INFINITY;
        let mut max_ratio = f64::NEG_INFINITY;
        let mut min_direction = f64::INFINITY;
        let mut worst_margin = f64::INFINITY;
        let mut worst_node = 0usize;
        let mut interior_all = true;
        let trace_only = self.op.is_trace();
        for m in 0..total {
            if !self.active[m] {
                continue;
            }
            let w = self.w_at(&caches, m);
            let (value, lam, mmat) = if trace_only {
                (w.trace(), None, SymMat::from_diag(&vec![F::one(); n]))
            } else {
                let (vals, vecs) = w.eigen();
                let (value, gl) = self.op.eval_grad(&vals).map_err(|e| match e {
                    CclError::OutsideDomain { margin } => {
                        CclError::DomainExit { node: grid.multi(m), margin }
                    }
                    other => other,
                })?;
                let mut mmat = SymMat::zeros(n);
                for a in 0..n {
                    for i in 0..n {
                        for j in i..n {
                            let add = gl[a] * vecs[a * n + i] * vecs[a * n + j];
                            mmat.add_to(i, j, add);
                        }
                    }
                }
                let sum = gl.iter().fold(F::zero(), |s, &x| s + x);
                let sumf = lower(sum).max(f64::MIN_POSITIVE);
                for &g in &gl {
                    let r = lower(g) / sumf;
                    min_ratio = min_ratio.min(r);
                    max_ratio = max_ratio.max(r);
                    min_direction = min_direction.min(lower(g));
                }
                (value, Some(vals), mmat)
            };
            let verdict = match &lam {
                Some(vals) => membership(self.op.domain(), vals, c::<F>(MEMBERSHIP_TOL))?,
                None => {
                    let vals = w.eigenvalues();
                    membership(self.op.domain(), &vals, c::<F>(MEMBERSHIP_TOL))?
                }
            };
            let margin = lower(verdict.margin);
            if margin < worst_margin {
                worst_margin = margin;
                worst_node = m;
            }
            if verdict.class != MembershipClass::Interior {
                interior_all = false;
            }
            let rhs = cf * self.psi.get(m) * (two * u.get(m)).exp();
            res.set(m, value - rhs);
            z[m] = -two * rhs;
            mfield.set_mat(m, &mmat);
            sup_res = sup_res.max(lower((value - rhs).abs()));
            rhs_sup = rhs_sup.max(lower(rhs.abs()));
        }
        if trace_only {
            min_ratio = 1.0 / n as f64;
            max_ratio = min_ratio;
            min_direction = 1.0;
        }
        Ok(SolveState {
            caches,
            res,
            sup_res,
            rhs_sup,
            m: mfield,
            z,
            min_ratio,
            max_ratio,
            min_direction,
            worst_margin,
            worst_node,
            interior_all,
        })
    }

    /// Jacobian action at the frozen state: second-order part through the
    /// operator's Hessian derivative, first-order transport from the
    /// gradient terms of W, and the zeroth-order density term. Pinned nodes
    /// act as identity rows.
    pub fn j_apply(&self, st: &SolveState<F>, x: &[F], out: &mut [F]) {
        let grid = &self.geo.grid;
        let tbl = &self.geo.tbl;
        let n = self.geo.n;
        let two = c::<F>(2.0);
        let quarter = c::<F>(0.25);
        for m in 0..grid.total_nodes() {
            if !self.active[m] {
                out[m] = x[m];
                continue;
            }
            let mm = st.m.mat(m);
            let du = st.caches.grad_slice(m);
            let mut acc = st.z[m] * x[m];
            let mut tr_m = F::zero();
            let mut du_dx = F::zero();
            let mut w_dx = F::zero();
            for i in 0..n {
                tr_m = tr_m + mm.get(i, i);
            }
            for i in 0..n {
                let hi = c::<F>(grid.spacing(i));
                let p = tbl.plus[i][m];
                let q = tbl.minus[i][m];
                acc = acc + mm.get(i, i) * (x[p] - two * x[m] + x[q]) / (hi * hi);
                let dxi = (x[p] - x[q]) / (two * hi);
                du_dx = du_dx + du[i] * dxi;
                let mut wi = F::zero();
                for k in 0..n {
                    wi = wi + mm.get(k, i) * du[k];
                }
                w_dx = w_dx + wi * dxi;
                for j in (i + 1)..n {
                    let hj = c::<F>(grid.spacing(j));
                    let pp = tbl.plus[j][p];
                    let pq = tbl.minus[j][p];
                    let qp = tbl.plus[j][q];
                    let qq = tbl.minus[j][q];
                    let cross = (x[pp] - x[pq] - x[qp] + x[qq]) * quarter / (hi * hj);
                    acc = acc + two * mm.get(i, j) * cross;
                }
            }
            out[m] = acc + tr_m * du_dx - two * w_dx;
        }
    }

    /// Diagonal of the Jacobian (second-difference centers plus the
    /// zeroth-order coefficient); the Jacobi preconditioner.
    pub fn j_diagonal(&self, st: &SolveState<F>) -> Vec<F> {
        let grid = &self.geo.grid;
        let n = self.geo.n;
        let two = c::<F>(2.0);
        let mut d = vec![F::one(); grid.total_nodes()];
        for m in 0..grid.total_nodes() {
            if !self.active[m] {
                continue;
            }
            let mm = st.m.mat(m);
            let mut acc = st.z[m];
            for i in 0..n {
                let hi = c::<F>(grid.spacing(i));
                acc = acc - two * mm.get(i, i) / (hi * hi);
            }
            d[m] = if acc.abs() > c::<F>(1e-300) { acc } else { F::one() };
        }
        d
    }

    /// Sup difference between the residual at u and the residual of the
    /// density-scaled problem (psi -> e^{2s} psi) at u - s. Exact constant-
    /// shift covariance makes this round-off sized.
    pub fn shift_gap(&self, u: &ScalarField<F>, s: f64) -> Result<f64> {
        let st1 = self.eval_state(u)?;
        let mut shifted = u.clone();
        let sf = c::<F>(s);
        for m in 0..self.geo.grid.total_nodes() {
            shifted.set(m, u.get(m) - sf);
        }
        let st2 = self.eval_state_scaled(&shifted, (2.0 * s).exp())?;
        Ok(lower(st1.res.max_abs_diff(&st2.res)))
    }
}

/// W[u] = hess u + |grad u|^2 g / 2 - du x du - A_g on the flat background.
pub fn w_matrix<F: Scalar>(
    caches: &ConformalFactor<F>,
    geo: &BaseGeometry<F>,
    m: usize,
) -> SymMat<F> {
    let n = geo.n;
    let du = caches.grad_slice(m);
    let half = c::<F>(0.5);
    let mut grad2 = F::zero();
    for &d in du {
        grad2 = grad2 + d * d;
    }
    let mut w = caches.hess_mat(m);
    let a = geo.bundle.schouten.mat(m);
    for i in 0..n {
        for j in i..n {
            let mut v = w.get(i, j) - du[i] * du[j] - a.get(i, j);
            if i == j {
                v = v + half * grad2;
            }
            w.set(i, j, v);
        }
    }
    w
}

fn realize_psi<F: Scalar>(
    spec: &ProblemSpec,
    geo: &BaseGeometry<F>,
    op: &SolveOperator,
    cval: f64,
    warnings: &mut Vec<String>,
) -> Result<(ScalarField<F>, Option<ScalarField<F>>)> {
    let grid = &geo.grid;
    let total = grid.total_nodes();
    match &spec.psi {
        PsiSpec::Constant { value } => {
            if !(*value > 0.0) {
                return Err(CclError::InvalidProblem(format!(
                    "constant density must be positive, got {value}"
                )));
            }
            let mut psi = ScalarField::zeros(grid.clone());
            for m in 0..total {
                psi.set(m, c::<F>(*value));
            }
            Ok((psi, None))
        }
        PsiSpec::GridFile { path } => {
            let psi = crate::io::read_scalar_field::<F>(std::path::Path::new(path), grid)?;
            Ok((psi, None))
        }
        PsiSpec::ManufacturedDiscrete { u_star } | PsiSpec::ManufacturedAnalytic { u_star } => {
            u_star.validate(geo.n)?;
            let target = u_star.realize::<F>(grid)?;
            let caches = match &spec.psi {
                PsiSpec::ManufacturedDiscrete { .. } => {
                    ConformalFactor::from_field(target.clone())?
                }
                _ => {
                    if !u_star.has_analytic_derivatives() {
                        warnings.push(
                            "target family has no exact derivatives; falling back to \
                             stencil caches"
                                .into(),
                        );
                    }
                    ConformalFactor::from_spec(u_star, grid)?
                }
            };
            let cf = c::<F>(cval);
            let two = c::<F>(2.0);
            let mut psi = ScalarField::zeros(grid.clone());
            for m in 0..total {
                let w = w_matrix(&caches, geo, m);
                let value = if op.is_trace() {
                    w.trace()
                } else {
                    let vals = w.eigenvalues();
                    op.eval_grad(&vals).map_err(|e| match e {
                        CclError::OutsideDomain { margin } => {
                            CclError::DomainExit { node: grid.multi(m), margin }
                        }
                        other => other,
                    })?
                    .0
                };
                psi.set(m, value / (cf * (two * target.get(m)).exp()));
            }
            Ok((psi, Some(target)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma1_torus_spec() -> ProblemSpec {
        ProblemSpec {
            manifold: Manifold::flat_torus(3, 12),
            f: SymmetricFunctionSpec::sigma1(3),
            tau: 1.0,
            alpha: -1.0,
            psi: PsiSpec::ManufacturedDiscrete {
                u_star: FieldSpec::Sum {
                    terms: vec![
                        FieldSpec::sin_axis(0, 0.1, 1.0, 0.0),
                        FieldSpec::cos_axis(1, 0.05, 1.0, 0.0),
                    ],
                },
            },
        }
    }

    #[test]
    fn direct_path_gates() {
        let p = ReducedProblem::<f64>::new(sigma1_torus_spec()).unwrap();
        assert!(matches!(p.op, SolveOperator::Direct(_)));
        assert_eq!(p.c, 1.0);
        assert!(p.op.is_trace());
        // The closed flat background forces a sign change in the
        // manufactured density at the target's maximum, so a warning (not a
        // rejection) is recorded on the trace path.
        assert!(!p.warnings.is_empty());

        let mut bad = sigma1_torus_spec();
        bad.alpha = 1.0;
        assert!(ReducedProblem::<f64>::new(bad).is_err());

        let mut bad = sigma1_torus_spec();
        bad.f = SymmetricFunctionSpec::sigma_k_root(3, 2);
        // Garding k=2 in dimension 3 is type 1: no direct path.
        assert!(ReducedProblem::<f64>::new(bad).is_err());
    }

    #[test]
    fn sharp_gate_and_prefactor() {
        let spec = ProblemSpec {
            manifold: Manifold::slab(4, 5, 6),
            f: SymmetricFunctionSpec::sigma_k_root(4, 2),
            tau: 2.5,
            alpha: 1.0,
            psi: PsiSpec::Constant { value: 1.0 },
        };
        let p = ReducedProblem::<f64>::new(spec.clone()).unwrap();
        assert!((p.c - 0.5).abs() < 1e-15);
        match &p.op {
            SolveOperator::Reduced(op) => assert!((op.rho() - 4.0 / 3.0).abs() < 1e-15),
            _ => panic!("expected the reduced operator"),
        }
        // tau = 2 sits exactly at the sharp threshold 1 + (n-2)/varrho = 2.
        let mut bad = spec.clone();
        bad.tau = 2.0;
        assert!(ReducedProblem::<f64>::new(bad).is_err());
        // Degenerate prefactor tau = 2 - 2/n rejected (also fails sharp).
        let mut bad = spec;
        bad.tau = 1.5;
        assert!(ReducedProblem::<f64>::new(bad).is_err());
    }

    #[test]
    fn manufactured_discrete_target_zeroes_the_residual() {
        let p = ReducedProblem::<f64>::new(sigma1_torus_spec()).unwrap();
        let target = p.target.clone().unwrap();
        let st = p.eval_state(&target).unwrap();
        assert!(st.sup_res < 1e-12 * (1.0 + st.rhs_sup), "{}", st.sup_res);
    }

    #[test]
    fn fully_nonlinear_manufactured_density_fails_on_the_closed_box() {
        // At the target's interior maximum the Hessian eigenvalues leave
        // every trace-positive cone, so the density construction must report
        // the exit instead of fabricating a sign-flipped problem.
        let spec = ProblemSpec {
            manifold: Manifold::flat_torus(4, 8),
            f: SymmetricFunctionSpec::sigma_k_root(4, 2),
            tau: 2.5,
            alpha: 1.0,
            psi: PsiSpec::ManufacturedDiscrete {
                u_star: FieldSpec::cos_axis(0, 0.1, 1.0, 0.0),
            },
        };
        let err = ReducedProblem::<f64>::new(spec).err().unwrap();
        assert!(matches!(err, CclError::DomainExit { .. }), "{err:?}");
    }

    #[test]
    fn shift_covariance_is_round_off_sized() {
        let p = ReducedProblem::<f64>::new(sigma1_torus_spec()).unwrap();
        let u = p.target.clone().unwrap();
        let gap = p.shift_gap(&u, 0.7).unwrap();
        assert!(gap <= 1e-12, "{gap}");
    }

    #[test]
    fn jacobian_matches_finite_differences_on_the_trace_path() {
        let p = ReducedProblem::<f64>::new(sigma1_torus_spec()).unwrap();
        let u = p.target.clone().unwrap();
        let st = p.eval_state(&u).unwrap();
        let total = p.geo.grid.total_nodes();
        // Direction with several frequencies.
        let dir: Vec<f64> = (0..total)
            .map(|m| {
                let x = p.geo.grid.point(m);
                0.3 * (x[0] + 2.0 * x[1]).sin() + 0.2 * (x[2]).cos()
            })
            .collect();
        let mut jx = vec![0.0; total];
        p.j_apply(&st, &dir, &mut jx);
        let h = 1e-6;
        let mut up = u.clone();
        let mut um = u.clone();
        for m in 0..total {
            up.set(m, u.get(m) + h * dir[m]);
            um.set(m, u.get(m) - h * dir[m]);
        }
        let rp = p.eval_state(&up).unwrap().res;
        let rm = p.eval_state(&um).unwrap().res;
        let mut worst = 0.0f64;
        for m in 0..total {
            let fd = (rp.get(m) - rm.get(m)) / (2.0 * h);
            worst = worst.max((fd - jx[m]).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn jacobian_matches_finite_differences_on_the_reduced_path() {
        let u_star = FieldSpec::Sum {
            terms: vec![
                FieldSpec::LinearAxis { axis: 0, slope: 1.0, offset: 0.0 },
                FieldSpec::sin_axis(1, 0.05, 1.0, 0.0),
                FieldSpec::cos_axis(2, 0.04, 1.0, 0.2),
                FieldSpec::sin_axis(3, 0.02, 1.0, 0.3),
            ],
        };
        let spec = ProblemSpec {
            manifold: Manifold::slab(4, 6, 6),
            f: SymmetricFunctionSpec::sigma_k_root(4, 2),
            tau: 2.5,
            alpha: 1.0,
            psi: PsiSpec::ManufacturedDiscrete { u_star },
        };
        let p = ReducedProblem::<f64>::new(spec).unwrap();
        let u = p.target.clone().unwrap();
        let st = p.eval_state(&u).unwrap();
        assert!(st.interior_all, "target must be admissible on the slab");
        let total = p.geo.grid.total_nodes();
        let dir: Vec<f64> = (0..total)
            .map(|m| {
                if !p.active[m] {
                    return 0.0;
                }
                let x = p.geo.grid.point(m);
                (x[0]).sin() * (0.4 * (x[1] + x[3]).cos() + 0.3 * (2.0 * x[2]).sin())
            })
            .collect();
        let mut jx = vec![0.0; total];
        p.j_apply(&st, &dir, &mut jx);
        let h = 1e-6;
        let mut up = u.clone();
        let mut um = u.clone();
        for m in 0..total {
            up.set(m, u.get(m) + h * dir[m]);
            um.set(m, u.get(m) - h * dir[m]);
        }
        let rp = p.eval_state(&up).unwrap().res;
        let rm = p.eval_state(&um).unwrap().res;
        let mut worst = 0.0f64;
        for m in 0..total {
            if !p.active[m] {
                continue;
            }
            let fd = (rp.get(m) - rm.get(m)) / (2.0 * h);
            worst = worst.max((fd - jx[m]).abs());
        }
        assert!(worst < 5e-5, "{worst}");
    }
}
