//! Model geometries: structured grids, analytic fields, curvature, and the
//! conformal tensor calculus over them.

pub mod conformal;
pub mod curvature;
pub mod fields;
pub mod grid;

use serde::{Deserialize, Serialize};

use crate::error::{CclError, Result};
use fields::FieldSpec;
use grid::Grid;

/// A background manifold-with-metric, discretized on a tensor-product grid.
///
/// Torus kinds are periodic boxes [0, 2*pi)^n; the slab bounds axis 0 on
/// [0, pi] and keeps the rest periodic. Sphere and hyperbolic charts carry
/// closed-form space-form curvature in an orthonormal frame (the grid is
/// just a node carrier for them). The radial ball is handled by the
/// dedicated radial solver and has no tensor-product grid here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Manifold {
    FlatTorus { n: usize, grid: Vec<usize> },
    SphereChart { n: usize, grid: Vec<usize>, radius: f64 },
    HyperbolicChart { n: usize, grid: Vec<usize> },
    ConformalTorus { n: usize, grid: Vec<usize>, phi: FieldSpec },
    RadialBall { n: usize, grid: Vec<usize> },
    Slab { n: usize, grid: Vec<usize> },
}

impl Manifold {
    pub fn flat_torus(n: usize, nodes: usize) -> Self {
        Manifold::FlatTorus { n, grid: vec![nodes] }
    }

    pub fn conformal_torus(n: usize, nodes: usize, phi: FieldSpec) -> Self {
        Manifold::ConformalTorus { n, grid: vec![nodes], phi }
    }

    pub fn slab(n: usize, interval_nodes: usize, periodic_nodes: usize) -> Self {
        let mut grid = vec![interval_nodes];
        grid.extend(std::iter::repeat(periodic_nodes).take(n - 1));
        Manifold::Slab { n, grid }
    }

    pub fn dim(&self) -> usize {
        match self {
            Manifold::FlatTorus { n, .. }
            | Manifold::SphereChart { n, .. }
            | Manifold::HyperbolicChart { n, .. }
            | Manifold::ConformalTorus { n, .. }
            | Manifold::RadialBall { n, .. }
            | Manifold::Slab { n, .. } => *n,
        }
    }

    pub fn grid_counts(&self) -> &[usize] {
        match self {
            Manifold::FlatTorus { grid, .. }
            | Manifold::SphereChart { grid, .. }
            | Manifold::HyperbolicChart { grid, .. }
            | Manifold::ConformalTorus { grid, .. }
            | Manifold::RadialBall { grid, .. }
            | Manifold::Slab { grid, .. } => grid,
        }
    }

    pub fn phi(&self) -> Option<&FieldSpec> {
        match self {
            Manifold::ConformalTorus { phi, .. } => Some(phi),
            _ => None,
        }
    }

    /// Flat metric in the chart coordinates (conformal factor identically 0).
    pub fn is_flat_background(&self) -> bool {
        matches!(self, Manifold::FlatTorus { .. } | Manifold::Slab { .. })
    }

    /// Per-axis node counts: either one entry (uniform) or one per axis.
    fn counts(&self) -> Result<Vec<usize>> {
        let n = self.dim();
        let g = self.grid_counts();
        let want = if matches!(self, Manifold::RadialBall { .. }) { 1 } else { n };
        if g.len() == 1 {
            return Ok(vec![g[0]; want]);
        }
        if g.len() == want {
            return Ok(g.to_vec());
        }
        Err(CclError::InvalidProblem(format!(
            "grid needs 1 or {want} node counts, got {}",
            g.len()
        )))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n < 3 {
            return Err(CclError::InvalidProblem(format!("dimension must be >= 3, got {n}")));
        }
        let counts = self.counts()?;
        if counts.iter().any(|&c| c < 3) {
            return Err(CclError::GridTooCoarse("need at least 3 nodes per axis".into()));
        }
        match self {
            Manifold::SphereChart { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(CclError::InvalidProblem(format!("radius must be > 0, got {radius}")));
                }
            }
            Manifold::ConformalTorus { phi, .. } => phi.validate(n)?,
            _ => {}
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        self.validate()?;
        let counts = self.counts()?;
        match self {
            Manifold::RadialBall { .. } => Err(CclError::InvalidProblem(
                "radial ball uses the one-dimensional radial mesh, not a box grid".into(),
            )),
            Manifold::Slab { .. } => {
                let mut axes = vec![grid::Axis {
                    kind: grid::AxisKind::Interval,
                    start: 0.0,
                    length: std::f64::consts::PI,
                    nodes: counts[0],
                }];
                for &c in &counts[1..] {
                    axes.push(grid::Axis {
                        kind: grid::AxisKind::Periodic,
                        start: 0.0,
                        length: std::f64::consts::TAU,
                        nodes: c,
                    });
                }
                Grid::new(axes)
            }
            _ => {
                let axes = counts
                    .iter()
                    .map(|&c| grid::Axis {
                        kind: grid::AxisKind::Periodic,
                        start: 0.0,
                        length: std::f64::consts::TAU,
                        nodes: c,
                    })
                    .collect();
                Grid::new(axes)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_round_trip_and_uniform_grid_expansion() {
        let m: Manifold = serde_json::from_str(
            r#"{"kind":"conformal_torus","n":4,"grid":[12],"phi":{"kind":"constant","value":0.0}}"#,
        )
        .unwrap();
        assert_eq!(m.dim(), 4);
        let g = m.grid().unwrap();
        assert_eq!(g.dim(), 4);
        assert_eq!(g.total_nodes(), 12usize.pow(4));
        let js = serde_json::to_string(&m).unwrap();
        assert!(js.contains("\"kind\":\"conformal_torus\""));
    }

    #[test]
    fn slab_grid_bounds_only_axis_zero() {
        let m = Manifold::slab(4, 5, 8);
        let g = m.grid().unwrap();
        assert_eq!(g.axis(0).kind, grid::AxisKind::Interval);
        assert_eq!(g.axis(1).kind, grid::AxisKind::Periodic);
        assert_eq!(g.total_nodes(), 5 * 8 * 8 * 8);
    }

    #[test]
    fn low_dimension_and_bad_radius_are_refused() {
        assert!(Manifold::flat_torus(2, 8).validate().is_err());
        let m = Manifold::SphereChart { n: 4, grid: vec![8], radius: 0.0 };
        assert!(m.validate().is_err());
        let m = Manifold::FlatTorus { n: 3, grid: vec![8, 8] };
        assert!(m.grid().is_err());
    }
}
