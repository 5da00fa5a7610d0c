//! Small dense kernels: packed symmetric matrices, a cyclic Jacobi
//! eigensolver, Cholesky congruence for generalized eigenvalues, and a
//! tridiagonal (Thomas) solve. Dimensions stay tiny (n <= 8 per grid node),
//! so simplicity and determinism beat BLAS.

use crate::error::{CclError, Result};
use crate::scalar::{c, Scalar};

/// Symmetric matrix stored as the packed upper triangle, row major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMat<F> {
    pub n: usize,
    a: Vec<F>,
}

#[inline]
fn pidx(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// Number of packed components of an n x n symmetric matrix.
#[inline]
pub fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of component (i, j) in the packed upper triangle.
#[inline]
pub fn packed_index(n: usize, i: usize, j: usize) -> usize {
    pidx(n, i, j)
}

impl<F: Scalar> SymMat<F> {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![F::zero(); packed_len(n)] }
    }

    pub fn from_packed(n: usize, a: Vec<F>) -> Self {
        assert_eq!(a.len(), packed_len(n));
        Self { n, a }
    }

    pub fn from_diag(d: &[F]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.a[pidx(self.n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.a[pidx(self.n, i, j)] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: F) {
        self.a[pidx(self.n, i, j)] = self.a[pidx(self.n, i, j)] + v;
    }

    pub fn packed(&self) -> &[F] {
        &self.a
    }

    pub fn trace(&self) -> F {
        (0..self.n).fold(F::zero(), |s, i| s + self.get(i, i))
    }

    pub fn scale(&self, t: F) -> Self {
        Self { n: self.n, a: self.a.iter().map(|&v| v * t).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let a = self.a.iter().zip(&other.a).map(|(&x, &y)| x + y).collect();
        Self { n: self.n, a }
    }

    /// Quadratic form v^T M v.
    pub fn quad(&self, v: &[F]) -> F {
        let mut s = F::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                s = s + self.get(i, j) * v[i] * v[j];
            }
        }
        s
    }

    /// Dense column-major copy.
    pub fn to_dense(&self) -> Vec<F> {
        let n = self.n;
        let mut d = vec![F::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                d[j * n + i] = self.get(i, j);
            }
        }
        d
    }

    /// Eigenvalues ascending, via cyclic Jacobi rotations.
    pub fn eigenvalues(&self) -> Vec<F> {
        let (vals, _) = jacobi_eigen(self, false);
        vals
    }

    /// Eigen-decomposition: values ascending plus column-major eigenvectors.
    pub fn eigen(&self) -> (Vec<F>, Vec<F>) {
        let (vals, vecs) = jacobi_eigen(self, true);
        (vals, vecs.expect("vectors requested"))
    }

    /// Inverse of an SPD matrix via its Cholesky factor.
    pub fn spd_inverse(&self) -> Result<SymMat<F>> {
        let n = self.n;
        let l = self.cholesky()?;
        let mut inv = SymMat::zeros(n);
        for col in 0..n {
            // Forward solve L y = e_col, then back solve L^T x = y.
            let mut y = vec![F::zero(); n];
            for i in 0..n {
                let mut s = if i == col { F::one() } else { F::zero() };
                for k in 0..i {
                    s = s - l[i * n + k] * y[k];
                }
                y[i] = s / l[i * n + i];
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in (i + 1)..n {
                    s = s - l[k * n + i] * y[k];
                }
                y[i] = s / l[i * n + i];
            }
            for i in col..n {
                inv.set(i, col, y[i]);
            }
        }
        Ok(inv)
    }

    /// Cholesky factor L with M = L L^T; fails on non-positive pivots.
    pub fn cholesky(&self) -> Result<Vec<F>> {
        let n = self.n;
        let mut l = vec![F::zero(); n * n]; // row major lower triangle
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= F::zero() {
                        return Err(CclError::InvariantViolation(format!(
                            "metric not positive definite (pivot {i} = {})",
                            crate::scalar::lower(s)
                        )));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(l)
    }
}

/// Eigenvalues of g^{-1} T for symmetric T and SPD g, ascending.
///
/// Congruence to an orthonormal frame: B = L^{-1} T L^{-T} with g = L L^T,
/// then a symmetric eigensolve; this keeps the result real and sorted even
/// though g^{-1} T itself is not symmetric.
pub fn generalized_eigenvalues<F: Scalar>(t: &SymMat<F>, g: &SymMat<F>) -> Result<Vec<F>> {
    let b = congruence(t, g)?;
    Ok(b.eigenvalues())
}

/// B = L^{-1} T L^{-T} for g = L L^T.
pub fn congruence<F: Scalar>(t: &SymMat<F>, g: &SymMat<F>) -> Result<SymMat<F>> {
    assert_eq!(t.n, g.n);
    let n = t.n;
    let l = g.cholesky()?;
    // Solve L X = T (column by column), then B = X L^{-T} row by row.
    let mut x = vec![F::zero(); n * n]; // row major
    for col in 0..n {
        for i in 0..n {
            let mut s = t.get(i, col);
            for k in 0..i {
                s = s - l[i * n + k] * x[k * n + col];
            }
            x[i * n + col] = s / l[i * n + i];
        }
    }
    let mut b = SymMat::zeros(n);
    for row in 0..n {
        // Solve L y = x[row, :]^T, giving B[row, :] = y^T.
        let mut y = vec![F::zero(); n];
        for i in 0..n {
            let mut s = x[row * n + i];
            for k in 0..i {
                s = s - l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for jcol in row..n {
            b.set(row, jcol, y[jcol]);
        }
    }
    Ok(b)
}

fn jacobi_eigen<F: Scalar>(m: &SymMat<F>, want_vectors: bool) -> (Vec<F>, Option<Vec<F>>) {
    let n = m.n;
    let mut a = m.to_dense(); // column major, symmetric
    let mut v = if want_vectors {
        let mut id = vec![F::zero(); n * n];
        for i in 0..n {
            id[i * n + i] = F::one();
        }
        Some(id)
    } else {
        None
    };
    let idx = |i: usize, j: usize| j * n + i;
    for _sweep in 0..64 {
        let mut off = F::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + a[idx(i, j)] * a[idx(i, j)];
            }
        }
        if off <= F::epsilon() * F::epsilon() * c::<F>(n as f64 * n as f64) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[idx(p, q)];
                if apq == F::zero() {
                    continue;
                }
                let app = a[idx(p, p)];
                let aqq = a[idx(q, q)];
                let theta = (aqq - app) / (c::<F>(2.0) * apq);
                let t = {
                    let s = if theta >= F::zero() { F::one() } else { -F::one() };
                    s / (theta.abs() + (theta * theta + F::one()).sqrt())
                };
                let cs = F::one() / (t * t + F::one()).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[idx(k, p)];
                    let akq = a[idx(k, q)];
                    a[idx(k, p)] = cs * akp - sn * akq;
                    a[idx(k, q)] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[idx(p, k)];
                    let aqk = a[idx(q, k)];
                    a[idx(p, k)] = cs * apk - sn * aqk;
                    a[idx(q, k)] = sn * apk + cs * aqk;
                }
                if let Some(vv) = v.as_mut() {
                    for k in 0..n {
                        let vkp = vv[idx(k, p)];
                        let vkq = vv[idx(k, q)];
                        vv[idx(k, p)] = cs * vkp - sn * vkq;
                        vv[idx(k, q)] = sn * vkp + cs * vkq;
                    }
                }
            }
        }
    }
    let mut vals: Vec<(F, usize)> = (0..n).map(|i| (a[idx(i, i)], i)).collect();
    vals.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite eigenvalues"));
    let sorted: Vec<F> = vals.iter().map(|&(x, _)| x).collect();
    let vecs = v.map(|vv| {
        let mut out = vec![F::zero(); n * n];
        for (newcol, &(_, oldcol)) in vals.iter().enumerate() {
            for i in 0..n {
                out[newcol * n + i] = vv[oldcol * n + i];
            }
        }
        out
    });
    (sorted, vecs)
}

/// In-place Thomas solve of a tridiagonal system.
///
/// `sub[i]` multiplies x[i-1] in row i (sub[0] unused), `diag[i]` is the
/// diagonal, `sup[i]` multiplies x[i+1] (last unused); `rhs` becomes x.
pub fn thomas_solve<F: Scalar>(sub: &[F], diag: &[F], sup: &[F], rhs: &mut [F]) -> Result<()> {
    let n = diag.len();
    assert!(sub.len() == n && sup.len() == n && rhs.len() == n);
    let mut d = diag.to_vec();
    for i in 1..n {
        if d[i - 1] == F::zero() {
            return Err(CclError::LinearSolver("zero pivot in tridiagonal solve".into()));
        }
        let w = sub[i] / d[i - 1];
        d[i] = d[i] - w * sup[i - 1];
        rhs[i] = rhs[i] - w * rhs[i - 1];
    }
    if d[n - 1] == F::zero() {
        return Err(CclError::LinearSolver("zero pivot in tridiagonal solve".into()));
    }
    rhs[n - 1] = rhs[n - 1] / d[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / d[i];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_matches_hand_diagonalization() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let mut m = SymMat::<f64>::zeros(2);
        m.set(0, 0, 2.0);
        m.set(1, 1, 2.0);
        m.set(0, 1, 1.0);
        let (vals, vecs) = m.eigen();
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
        // Residual ||M v - lambda v||.
        for k in 0..2 {
            for i in 0..2 {
                let mut r = -vals[k] * vecs[k * 2 + i];
                for j in 0..2 {
                    r += m.get(i, j) * vecs[k * 2 + j];
                }
                assert!(r.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn jacobi_handles_repeated_eigenvalues() {
        let m = SymMat::<f64>::from_diag(&[2.0, 2.0, 2.0, 5.0]);
        let vals = m.eigenvalues();
        assert_eq!(vals.len(), 4);
        assert!((vals[0] - 2.0).abs() < 1e-15 && (vals[2] - 2.0).abs() < 1e-15);
        assert!((vals[3] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn generalized_eigenvalues_reduce_to_scaling_for_conformal_metric() {
        // g = 4 I, T = diag(4, 8): eig(g^{-1} T) = (1, 2).
        let g = SymMat::<f64>::from_diag(&[4.0, 4.0]);
        let t = SymMat::<f64>::from_diag(&[4.0, 8.0]);
        let vals = generalized_eigenvalues(&t, &g).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite_metric() {
        let g = SymMat::<f64>::from_diag(&[1.0, -1.0]);
        assert!(g.cholesky().is_err());
    }

    #[test]
    fn spd_inverse_round_trips() {
        let mut m = SymMat::<f64>::zeros(3);
        m.set(0, 0, 4.0);
        m.set(1, 1, 3.0);
        m.set(2, 2, 5.0);
        m.set(0, 1, 1.0);
        m.set(1, 2, -0.5);
        let inv = m.spd_inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += m.get(i, k) * inv.get(k, j);
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-14, "({i},{j}) -> {s}");
            }
        }
    }

    #[test]
    fn thomas_matches_dense_solve() {
        let sub = [0.0f64, 1.0, 1.0, 1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let sup = [1.0, 1.0, 1.0, 0.0];
        let mut rhs = [5.0, 6.0, 6.0, 5.0];
        thomas_solve(&sub, &diag, &sup, &mut rhs).unwrap();
        for x in rhs {
            assert!((x - 1.0).abs() < 1e-14);
        }
    }
}
