//! Tensor-product structured grids (periodic and bounded axes), scalar and
//! packed symmetric-tensor fields over them, and precomputed neighbor
//! tables for stencil work.

use crate::error::{CclError, Result};
use crate::linalg::{packed_len, SymMat};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisKind {
    /// start + i*h for i in 0..nodes, h = length/nodes, wrapping.
    Periodic,
    /// start + i*h for i in 0..nodes, h = length/(nodes-1), endpoints held.
    Interval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub kind: AxisKind,
    pub start: f64,
    pub length: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        match self.kind {
            AxisKind::Periodic => self.length / self.nodes as f64,
            AxisKind::Interval => self.length / (self.nodes - 1) as f64,
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.start + i as f64 * self.spacing()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    total: usize,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Grid> {
        if axes.is_empty() {
            return Err(CclError::GridTooCoarse("no axes".into()));
        }
        for ax in &axes {
            let min = match ax.kind {
                AxisKind::Periodic => 3,
                AxisKind::Interval => 3,
            };
            if ax.nodes < min || !(ax.length > 0.0) {
                return Err(CclError::GridTooCoarse(format!(
                    "axis needs at least {min} nodes and positive length, got {ax:?}"
                )));
            }
        }
        let mut strides = vec![0usize; axes.len()];
        let mut acc = 1usize;
        for (i, ax) in axes.iter().enumerate().rev() {
            strides[i] = acc;
            acc = acc.checked_mul(ax.nodes).ok_or_else(|| {
                CclError::GridTooCoarse("node count overflow".into())
            })?;
        }
        Ok(Grid { axes, strides, total: acc })
    }

    /// All axes periodic on [0, 2*pi).
    pub fn torus(dim: usize, nodes: usize) -> Result<Grid> {
        let ax = Axis {
            kind: AxisKind::Periodic,
            start: 0.0,
            length: std::f64::consts::TAU,
            nodes,
        };
        Grid::new(vec![ax; dim])
    }

    /// Axis 0 bounded on [0, pi] (endpoints included), the rest periodic
    /// on [0, 2*pi).
    pub fn slab(dim: usize, interval_nodes: usize, periodic_nodes: usize) -> Result<Grid> {
        let mut axes = vec![Axis {
            kind: AxisKind::Interval,
            start: 0.0,
            length: std::f64::consts::PI,
            nodes: interval_nodes,
        }];
        axes.extend(vec![
            Axis {
                kind: AxisKind::Periodic,
                start: 0.0,
                length: std::f64::consts::TAU,
                nodes: periodic_nodes,
            };
            dim - 1
        ]);
        Grid::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn total_nodes(&self) -> usize {
        self.total
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.axes[axis].spacing()
    }

    pub fn min_nodes_per_axis(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).min().unwrap_or(0)
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(m, s)| m * s).sum()
    }

    pub fn multi(&self, flat: usize) -> Vec<usize> {
        let mut out = vec![0usize; self.dim()];
        self.multi_into(flat, &mut out);
        out
    }

    pub fn multi_into(&self, flat: usize, out: &mut [usize]) {
        let mut rest = flat;
        for (i, s) in self.strides.iter().enumerate() {
            out[i] = rest / s;
            rest %= s;
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let multi = self.multi(flat);
        multi.iter().zip(&self.axes).map(|(&i, ax)| ax.coord(i)).collect()
    }

    /// Flat index of the node one step along `axis`; None when a bounded
    /// axis runs off the grid.
    pub fn neighbor(&self, flat: usize, axis: usize, step: isize) -> Option<usize> {
        let n = self.axes[axis].nodes;
        let i = (flat / self.strides[axis]) % n;
        let j = i as isize + step;
        let wrapped = match self.axes[axis].kind {
            AxisKind::Periodic => j.rem_euclid(n as isize) as usize,
            AxisKind::Interval => {
                if j < 0 || j >= n as isize {
                    return None;
                }
                j as usize
            }
        };
        let delta = wrapped as isize - i as isize;
        Some((flat as isize + delta * self.strides[axis] as isize) as usize)
    }

    /// True when any bounded axis sits at an endpoint.
    pub fn on_boundary(&self, flat: usize) -> bool {
        for (axis, ax) in self.axes.iter().enumerate() {
            if ax.kind == AxisKind::Interval {
                let i = (flat / self.strides[axis]) % ax.nodes;
                if i == 0 || i == ax.nodes - 1 {
                    return true;
                }
            }
        }
        false
    }
}

/// Precomputed one-step neighbor indices per axis; usize::MAX marks a
/// bounded-axis edge.
#[derive(Clone, Debug)]
pub struct NeighborTable {
    pub plus: Vec<Vec<usize>>,
    pub minus: Vec<Vec<usize>>,
}

pub const NO_NEIGHBOR: usize = usize::MAX;

impl NeighborTable {
    pub fn build(grid: &Grid) -> NeighborTable {
        let d = grid.dim();
        let total = grid.total_nodes();
        let mut plus = vec![vec![0usize; total]; d];
        let mut minus = vec![vec![0usize; total]; d];
        for a in 0..d {
            for i in 0..total {
                plus[a][i] = grid.neighbor(i, a, 1).unwrap_or(NO_NEIGHBOR);
                minus[a][i] = grid.neighbor(i, a, -1).unwrap_or(NO_NEIGHBOR);
            }
        }
        NeighborTable { plus, minus }
    }

    pub fn step(&self, flat: usize, axis: usize, forward: bool) -> usize {
        if forward {
            self.plus[axis][flat]
        } else {
            self.minus[axis][flat]
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<F> {
    grid: Grid,
    data: Vec<F>,
}

impl<F: Scalar> ScalarField<F> {
    pub fn zeros(grid: Grid) -> Self {
        let total = grid.total_nodes();
        ScalarField { grid, data: vec![F::zero(); total] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> F) -> Self {
        let data = (0..grid.total_nodes()).map(|i| f(&grid.point(i))).collect();
        ScalarField { grid, data }
    }

    pub fn from_data(grid: Grid, data: Vec<F>) -> Result<Self> {
        if data.len() != grid.total_nodes() {
            return Err(CclError::DimensionMismatch {
                expected: grid.total_nodes(),
                got: data.len(),
            });
        }
        Ok(ScalarField { grid, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn get(&self, flat: usize) -> F {
        self.data[flat]
    }

    pub fn set(&mut self, flat: usize, v: F) {
        self.data[flat] = v;
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn sup_norm(&self) -> F {
        self.data.iter().fold(F::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &ScalarField<F>) -> F {
        debug_assert_eq!(self.grid, other.grid);
        self.data
            .iter()
            .zip(&other.data)
            .fold(F::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Second-order central first derivative along one axis. Errors on the
    /// edge row of a bounded axis.
    pub fn d1(&self, tbl: &NeighborTable, axis: usize, flat: usize) -> Result<F> {
        let p = tbl.plus[axis][flat];
        let m = tbl.minus[axis][flat];
        if p == NO_NEIGHBOR || m == NO_NEIGHBOR {
            return Err(CclError::GridTooCoarse("stencil leaves a bounded axis".into()));
        }
        let h = crate::scalar::c::<F>(self.grid.spacing(axis));
        Ok((self.data[p] - self.data[m]) / (h + h))
    }

    /// Second-order central second derivative along one axis.
    pub fn d2(&self, tbl: &NeighborTable, axis: usize, flat: usize) -> Result<F> {
        let p = tbl.plus[axis][flat];
        let m = tbl.minus[axis][flat];
        if p == NO_NEIGHBOR || m == NO_NEIGHBOR {
            return Err(CclError::GridTooCoarse("stencil leaves a bounded axis".into()));
        }
        let h = crate::scalar::c::<F>(self.grid.spacing(axis));
        let two = F::one() + F::one();
        Ok((self.data[p] - two * self.data[flat] + self.data[m]) / (h * h))
    }

    /// Second-order mixed derivative via the four diagonal neighbors.
    pub fn cross(&self, tbl: &NeighborTable, a: usize, b: usize, flat: usize) -> Result<F> {
        let err = || CclError::GridTooCoarse("stencil leaves a bounded axis".into());
        let pa = tbl.plus[a][flat];
        let ma = tbl.minus[a][flat];
        if pa == NO_NEIGHBOR || ma == NO_NEIGHBOR {
            return Err(err());
        }
        let pp = tbl.plus[b][pa];
        let pm = tbl.minus[b][pa];
        let mp = tbl.plus[b][ma];
        let mm = tbl.minus[b][ma];
        if pp == NO_NEIGHBOR || pm == NO_NEIGHBOR || mp == NO_NEIGHBOR || mm == NO_NEIGHBOR {
            return Err(err());
        }
        let ha = crate::scalar::c::<F>(self.grid.spacing(a));
        let hb = crate::scalar::c::<F>(self.grid.spacing(b));
        let four = crate::scalar::c::<F>(4.0);
        Ok((self.data[pp] - self.data[pm] - self.data[mp] + self.data[mm]) / (four * ha * hb))
    }

    /// Fourth-order central first derivative; periodic axes only.
    pub fn d1_o4(&self, tbl: &NeighborTable, axis: usize, flat: usize) -> Result<F> {
        let p1 = tbl.plus[axis][flat];
        let m1 = tbl.minus[axis][flat];
        if p1 == NO_NEIGHBOR || m1 == NO_NEIGHBOR {
            return Err(CclError::GridTooCoarse("stencil leaves a bounded axis".into()));
        }
        let p2 = tbl.plus[axis][p1];
        let m2 = tbl.minus[axis][m1];
        if p2 == NO_NEIGHBOR || m2 == NO_NEIGHBOR {
            return Err(CclError::GridTooCoarse("stencil leaves a bounded axis".into()));
        }
        let h = crate::scalar::c::<F>(self.grid.spacing(axis));
        let eight = crate::scalar::c::<F>(8.0);
        let twelve = crate::scalar::c::<F>(12.0);
        Ok((eight * (self.data[p1] - self.data[m1]) - (self.data[p2] - self.data[m2]))
            / (twelve * h))
    }

    /// Fourth-order central second derivative; periodic axes only.
    pub fn d2_o4(&self, tbl: &NeighborTable, axis: usize, flat: usize) -> Result<F> {
        let p1 = tbl.plus[axis][flat];
        let m1 = tbl.minus[axis][flat];
        if p1 == NO_NEIGHBOR || m1 == NO_NEIGHBOR {
            return Err(CclError::GridTooCoarse("stencil leaves a bounded axis".into()));
        }
        let p2 = tbl.plus[axis][p1];
        let m2 = tbl.minus[axis][m1];
        if p2 == NO_NEIGHBOR || m2 == NO_NEIGHBOR {
            return Err(CclError::GridTooCoarse("stencil leaves a bounded axis".into()));
        }
        let h = crate::scalar::c::<F>(self.grid.spacing(axis));
        let c16 = crate::scalar::c::<F>(16.0);
        let c30 = crate::scalar::c::<F>(30.0);
        let c12 = crate::scalar::c::<F>(12.0);
        Ok((c16 * (self.data[p1] + self.data[m1])
            - (self.data[p2] + self.data[m2])
            - c30 * self.data[flat])
            / (c12 * h * h))
    }
}

/// Symmetric 2-tensor per node, packed upper-triangular row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField<F> {
    grid: Grid,
    dim: usize,
    data: Vec<F>,
}

impl<F: Scalar> SymTensorField<F> {
    pub fn zeros(grid: Grid) -> Self {
        let dim = grid.dim();
        let total = grid.total_nodes() * packed_len(dim);
        SymTensorField { grid, dim, data: vec![F::zero(); total] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mat(&self, flat: usize) -> SymMat<F> {
        let p = packed_len(self.dim);
        SymMat::from_packed(self.dim, self.data[flat * p..(flat + 1) * p].to_vec())
    }

    /// Single component without unpacking the node's matrix.
    #[inline]
    pub fn mat_get(&self, flat: usize, i: usize, j: usize) -> F {
        let p = packed_len(self.dim);
        self.data[flat * p + crate::linalg::packed_index(self.dim, i, j)]
    }

    pub fn set_mat(&mut self, flat: usize, m: &SymMat<F>) {
        debug_assert_eq!(m.n, self.dim);
        let p = packed_len(self.dim);
        self.data[flat * p..(flat + 1) * p].copy_from_slice(m.packed());
    }

    pub fn from_fn(grid: Grid, f: impl Fn(usize) -> SymMat<F>) -> Self {
        let mut out = SymTensorField::zeros(grid);
        for i in 0..out.grid.total_nodes() {
            let m = f(i);
            out.set_mat(i, &m);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &SymTensorField<F>) -> F {
        debug_assert_eq!(self.grid, other.grid);
        self.data
            .iter()
            .zip(&other.data)
            .fold(F::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn sup_norm(&self) -> F {
        self.data.iter().fold(F::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_wraps_and_slab_stops() {
        let t = Grid::torus(2, 4).unwrap();
        assert_eq!(t.total_nodes(), 16);
        let last = t.index(&[0, 3]);
        assert_eq!(t.neighbor(last, 1, 1), Some(t.index(&[0, 0])));
        let s = Grid::slab(2, 5, 4).unwrap();
        let edge = s.index(&[4, 0]);
        assert_eq!(s.neighbor(edge, 0, 1), None);
        assert!(s.on_boundary(edge));
        assert!(!s.on_boundary(s.index(&[2, 0])));
    }

    #[test]
    fn spacing_conventions() {
        let t = Grid::torus(1, 8).unwrap();
        assert!((t.spacing(0) - std::f64::consts::TAU / 8.0).abs() < 1e-15);
        let s = Grid::slab(2, 5, 8).unwrap();
        assert!((s.spacing(0) - std::f64::consts::PI / 4.0).abs() < 1e-15);
        assert!((s.axis(0).coord(4) - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn flat_multi_round_trip() {
        let g = Grid::torus(3, 5).unwrap();
        for flat in [0usize, 7, 63, 124] {
            assert_eq!(g.index(&g.multi(flat)), flat);
        }
    }

    #[test]
    fn derivatives_are_exact_on_resolved_trig() {
        let g = Grid::torus(1, 64).unwrap();
        let tbl = NeighborTable::build(&g);
        let u = ScalarField::from_fn(g.clone(), |x| x[0].sin());
        let flat = 10;
        let x = g.point(flat)[0];
        let h = g.spacing(0);
        assert!((u.d1(&tbl, 0, flat).unwrap() - x.cos()).abs() < h * h);
        assert!((u.d2(&tbl, 0, flat).unwrap() + x.sin()).abs() < h * h);
        assert!((u.d1_o4(&tbl, 0, flat).unwrap() - x.cos()).abs() < h.powi(4));
        assert!((u.d2_o4(&tbl, 0, flat).unwrap() + x.sin()).abs() < 2.0 * h.powi(4));
    }

    #[test]
    fn cross_derivative_on_a_product_field() {
        let g = Grid::torus(2, 48).unwrap();
        let tbl = NeighborTable::build(&g);
        let u = ScalarField::from_fn(g.clone(), |x| x[0].sin() * x[1].cos());
        let flat = g.index(&[5, 9]);
        let p = g.point(flat);
        let want = p[0].cos() * -p[1].sin();
        let h = g.spacing(0);
        assert!((u.cross(&tbl, 0, 1, flat).unwrap() - want).abs() < 2.0 * h * h);
    }

    #[test]
    fn tensor_field_round_trips_matrices() {
        let g = Grid::torus(3, 4).unwrap();
        let mut t = SymTensorField::<f64>::zeros(g);
        let mut m = SymMat::zeros(3);
        m.set(0, 1, 0.5);
        m.set(2, 2, -2.0);
        t.set_mat(7, &m);
        assert_eq!(t.mat(7).get(1, 0), 0.5);
        assert_eq!(t.mat(7).get(2, 2), -2.0);
        assert_eq!(t.mat(6).get(0, 0), 0.0);
    }
}
