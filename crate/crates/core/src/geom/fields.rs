//! Analytic scalar-field families with closed-form first and second
//! derivatives, used for conformal factors, height functions, and
//! manufactured data. All trigonometric families are 2*pi-periodic per
//! axis, so they restrict cleanly to torus and slab grids.

use serde::{Deserialize, Serialize};

use crate::error::{CclError, Result};
use crate::geom::grid::{Grid, ScalarField};
use crate::linalg::SymMat;
use crate::scalar::{c, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosFactor {
    pub axis: usize,
    pub freq: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    /// amplitude * prod_j cos(freq_j * x_{axis_j} + phase_j)
    CosProduct {
        amplitude: f64,
        factors: Vec<CosFactor>,
    },
    Sum {
        terms: Vec<FieldSpec>,
    },
    /// slope * x_axis + offset (use only on bounded axes).
    LinearAxis {
        axis: usize,
        slope: f64,
        offset: f64,
    },
    /// amplitude * (s - warp_kappa(s)), s = x_axis - shift wrapped to
    /// (-pi, pi]. Smooth and periodic with a steep interior transition of
    /// width ~1/kappa; its periodic second derivative is O(kappa) there.
    KinkProfile {
        axis: usize,
        kappa: f64,
        amplitude: f64,
        #[serde(default)]
        shift: f64,
    },
    /// offset + amplitude * sum_i -cos(warp_kappa(x_i - center_i) + gamma).
    /// A product-structure function on the torus whose 2^n critical points
    /// all sit within O(1/kappa) of `center`.
    WarpedWells {
        center: Vec<f64>,
        kappa: f64,
        amplitude: f64,
        offset: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    /// amplitude * prod_i ((1 + cos(x_i - center_i))/2)^power: a smooth
    /// periodic bump supported (numerically) near `center`.
    CosBump {
        center: Vec<f64>,
        amplitude: f64,
        power: u32,
    },
    /// Node data loaded from the binary grid format; value-only (no
    /// analytic derivatives).
    GridFile {
        path: String,
    },
}

fn default_gamma() -> f64 {
    std::f64::consts::FRAC_PI_2
}

/// Wrap to (-pi, pi].
pub fn wrap_pi(t: f64) -> f64 {
    let r = t.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r - std::f64::consts::TAU
    } else {
        r
    }
}

/// Circle warp fixing 0 and pi: 2*atan2(kappa*sin(s/2), cos(s/2)). Expands
/// near 0 by kappa, compresses near +-pi by 1/kappa.
pub fn warp(kappa: f64, s: f64) -> f64 {
    2.0 * (kappa * (0.5 * s).sin()).atan2((0.5 * s).cos())
}

pub fn warp_d1(kappa: f64, s: f64) -> f64 {
    let d = denom(kappa, s);
    kappa / d
}

pub fn warp_d2(kappa: f64, s: f64) -> f64 {
    let d = denom(kappa, s);
    -kappa * (kappa * kappa - 1.0) * s.sin() / (2.0 * d * d)
}

fn denom(kappa: f64, s: f64) -> f64 {
    let c2 = (0.5 * s).cos().powi(2);
    let s2 = (0.5 * s).sin().powi(2);
    c2 + kappa * kappa * s2
}

impl FieldSpec {
    pub fn constant(value: f64) -> Self {
        FieldSpec::Constant { value }
    }

    /// amplitude * cos(freq * x_axis + phase)
    pub fn cos_axis(axis: usize, amplitude: f64, freq: f64, phase: f64) -> Self {
        FieldSpec::CosProduct { amplitude, factors: vec![CosFactor { axis, freq, phase }] }
    }

    /// amplitude * sin(freq * x_axis + phase)
    pub fn sin_axis(axis: usize, amplitude: f64, freq: f64, phase: f64) -> Self {
        FieldSpec::cos_axis(axis, amplitude, freq, phase - std::f64::consts::FRAC_PI_2)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: String| Err(CclError::InvalidField(msg));
        match self {
            FieldSpec::Constant { value } => {
                if !value.is_finite() {
                    return bad(format!("non-finite constant {value}"));
                }
            }
            FieldSpec::CosProduct { factors, .. } => {
                for f in factors {
                    if f.axis >= dim {
                        return bad(format!("axis {} outside 0..{dim}", f.axis));
                    }
                }
            }
            FieldSpec::Sum { terms } => {
                for t in terms {
                    t.validate(dim)?;
                }
            }
            FieldSpec::LinearAxis { axis, .. } | FieldSpec::KinkProfile { axis, .. } => {
                if *axis >= dim {
                    return bad(format!("axis {axis} outside 0..{dim}"));
                }
                if let FieldSpec::KinkProfile { kappa, .. } = self {
                    if !(*kappa >= 1.0) {
                        return bad(format!("kink kappa must be >= 1, got {kappa}"));
                    }
                }
            }
            FieldSpec::WarpedWells { center, kappa, .. } => {
                if center.len() != dim {
                    return bad(format!("center length {} != dim {dim}", center.len()));
                }
                if !(*kappa >= 1.0) {
                    return bad(format!("wells kappa must be >= 1, got {kappa}"));
                }
            }
            FieldSpec::CosBump { center, power, .. } => {
                if center.len() != dim {
                    return bad(format!("center length {} != dim {dim}", center.len()));
                }
                if *power < 2 {
                    return bad(format!("bump power must be >= 2, got {power}"));
                }
            }
            FieldSpec::GridFile { .. } => {}
        }
        Ok(())
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        match self {
            FieldSpec::GridFile { .. } => false,
            FieldSpec::Sum { terms } => terms.iter().all(|t| t.has_analytic_derivatives()),
            _ => true,
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            FieldSpec::Constant { value } => *value,
            FieldSpec::CosProduct { amplitude, factors } => {
                amplitude * factors.iter().map(|f| (f.freq * x[f.axis] + f.phase).cos()).product::<f64>()
            }
            FieldSpec::Sum { terms } => {
                let mut s = 0.0;
                for t in terms {
                    s += t.value(x)?;
                }
                s
            }
            FieldSpec::LinearAxis { axis, slope, offset } => slope * x[*axis] + offset,
            FieldSpec::KinkProfile { axis, kappa, amplitude, shift } => {
                let s = wrap_pi(x[*axis] - shift);
                amplitude * (s - warp(*kappa, s))
            }
            FieldSpec::WarpedWells { center, kappa, amplitude, offset, gamma } => {
                let mut s = *offset;
                for (xi, ci) in x.iter().zip(center) {
                    s -= amplitude * (warp(*kappa, wrap_pi(xi - ci)) + gamma).cos();
                }
                s
            }
            FieldSpec::CosBump { center, amplitude, power } => {
                let mut p = *amplitude;
                for (xi, ci) in x.iter().zip(center) {
                    p *= (0.5 * (1.0 + (xi - ci).cos())).powi(*power as i32);
                }
                p
            }
            FieldSpec::GridFile { path } => {
                return Err(CclError::InvalidField(format!(
                    "grid-file field {path} carries node data only; realize it on a grid"
                )))
            }
        })
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        Ok(match self {
            FieldSpec::Constant { .. } => vec![0.0; n],
            FieldSpec::CosProduct { amplitude, factors } => {
                let vals: Vec<f64> = factors.iter().map(|f| (f.freq * x[f.axis] + f.phase).cos()).collect();
                let mut g = vec![0.0; n];
                for (j, f) in factors.iter().enumerate() {
                    let dv = -f.freq * (f.freq * x[f.axis] + f.phase).sin();
                    let rest: f64 = vals.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| v).product();
                    g[f.axis] += amplitude * dv * rest;
                }
                g
            }
            FieldSpec::Sum { terms } => {
                let mut g = vec![0.0; n];
                for t in terms {
                    for (gi, ti) in g.iter_mut().zip(t.grad(x)?) {
                        *gi += ti;
                    }
                }
                g
            }
            FieldSpec::LinearAxis { axis, slope, .. } => {
                let mut g = vec![0.0; n];
                g[*axis] = *slope;
                g
            }
            FieldSpec::KinkProfile { axis, kappa, amplitude, shift } => {
                let s = wrap_pi(x[*axis] - shift);
                let mut g = vec![0.0; n];
                g[*axis] = amplitude * (1.0 - warp_d1(*kappa, s));
                g
            }
            FieldSpec::WarpedWells { center, kappa, amplitude, gamma, .. } => {
                let mut g = vec![0.0; n];
                for (i, (xi, ci)) in x.iter().zip(center).enumerate() {
                    let s = wrap_pi(xi - ci);
                    g[i] = amplitude * (warp(*kappa, s) + gamma).sin() * warp_d1(*kappa, s);
                }
                g
            }
            FieldSpec::CosBump { center, amplitude, power } => {
                let p = *power as i32;
                let b: Vec<f64> = x
                    .iter()
                    .zip(center)
                    .map(|(xi, ci)| (0.5 * (1.0 + (xi - ci).cos())).powi(p))
                    .collect();
                let mut g = vec![0.0; n];
                for i in 0..n {
                    let s = x[i] - center[i];
                    let base = 0.5 * (1.0 + s.cos());
                    let db = -(p as f64) * base.powi(p - 1) * 0.5 * s.sin();
                    let rest: f64 = b.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, v)| v).product();
                    g[i] = amplitude * db * rest;
                }
                g
            }
            FieldSpec::GridFile { path } => {
                return Err(CclError::InvalidField(format!(
                    "grid-file field {path} has no analytic gradient"
                )))
            }
        })
    }

    pub fn hess(&self, x: &[f64]) -> Result<SymMat<f64>> {
        let n = x.len();
        let mut h = SymMat::zeros(n);
        match self {
            FieldSpec::Constant { .. } | FieldSpec::LinearAxis { .. } => {}
            FieldSpec::CosProduct { amplitude, factors } => {
                let vals: Vec<f64> = factors.iter().map(|f| (f.freq * x[f.axis] + f.phase).cos()).collect();
                let d1: Vec<f64> = factors
                    .iter()
                    .map(|f| -f.freq * (f.freq * x[f.axis] + f.phase).sin())
                    .collect();
                for (j, fj) in factors.iter().enumerate() {
                    // Same-factor second derivative.
                    let d2 = -fj.freq * fj.freq * vals[j];
                    let rest: f64 =
                        vals.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| v).product();
                    h.add_to(fj.axis, fj.axis, amplitude * d2 * rest);
                    // Distinct-factor products.
                    for (k, fk) in factors.iter().enumerate() {
                        if k <= j {
                            continue;
                        }
                        let rest: f64 = vals
                            .iter()
                            .enumerate()
                            .filter(|(m, _)| *m != j && *m != k)
                            .map(|(_, v)| v)
                            .product();
                        let term = amplitude * d1[j] * d1[k] * rest;
                        if fj.axis == fk.axis {
                            h.add_to(fj.axis, fj.axis, 2.0 * term);
                        } else {
                            h.add_to(fj.axis, fk.axis, term);
                        }
                    }
                }
            }
            FieldSpec::Sum { terms } => {
                for t in terms {
                    h = h.add(&t.hess(x)?);
                }
            }
            FieldSpec::KinkProfile { axis, kappa, amplitude, shift } => {
                let s = wrap_pi(x[*axis] - shift);
                h.set(*axis, *axis, -amplitude * warp_d2(*kappa, s));
            }
            FieldSpec::WarpedWells { center, kappa, amplitude, gamma, .. } => {
                for (i, (xi, ci)) in x.iter().zip(center).enumerate() {
                    let s = wrap_pi(xi - ci);
                    let t = warp(*kappa, s) + gamma;
                    let d1 = warp_d1(*kappa, s);
                    let d2 = warp_d2(*kappa, s);
                    h.set(i, i, amplitude * (t.cos() * d1 * d1 + t.sin() * d2));
                }
            }
            FieldSpec::CosBump { center, amplitude, power } => {
                let p = *power as i32;
                let base: Vec<f64> = x.iter().zip(center).map(|(xi, ci)| 0.5 * (1.0 + (xi - ci).cos())).collect();
                let b: Vec<f64> = base.iter().map(|v| v.powi(p)).collect();
                let db: Vec<f64> = x
                    .iter()
                    .zip(center)
                    .enumerate()
                    .map(|(i, (xi, ci))| -(p as f64) * base[i].powi(p - 1) * 0.5 * (xi - ci).sin())
                    .collect();
                for i in 0..n {
                    let s = x[i] - center[i];
                    let d2 = (p as f64) * (p as f64 - 1.0) * base[i].powi(p - 2) * 0.25 * s.sin() * s.sin()
                        - (p as f64) * base[i].powi(p - 1) * 0.5 * s.cos();
                    let rest: f64 = b.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, v)| v).product();
                    h.set(i, i, amplitude * d2 * rest);
                    for j in (i + 1)..n {
                        let rest: f64 = b
                            .iter()
                            .enumerate()
                            .filter(|(k, _)| *k != i && *k != j)
                            .map(|(_, v)| v)
                            .product();
                        h.set(i, j, amplitude * db[i] * db[j] * rest);
                    }
                }
            }
            FieldSpec::GridFile { path } => {
                return Err(CclError::InvalidField(format!(
                    "grid-file field {path} has no analytic hessian"
                )))
            }
        }
        Ok(h)
    }

    /// Sample onto grid nodes. Grid-file fields are loaded and checked for
    /// shape agreement instead of sampled.
    pub fn realize<F: Scalar>(&self, grid: &Grid) -> Result<ScalarField<F>> {
        self.validate(grid.dim())?;
        if let FieldSpec::GridFile { path } = self {
            let gd = crate::io::read_grid_data(std::path::Path::new(path))?;
            crate::io::check_grid_shape(&gd, grid, 1)?;
            let data = gd.data.iter().map(|&v| c::<F>(v)).collect();
            return ScalarField::from_data(grid.clone(), data);
        }
        let mut data = Vec::with_capacity(grid.total_nodes());
        for i in 0..grid.total_nodes() {
            data.push(c::<F>(self.value(&grid.point(i))?));
        }
        ScalarField::from_data(grid.clone(), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(spec: &FieldSpec, x: &[f64]) {
        let h = 1e-5;
        let g = spec.grad(x).unwrap();
        let hs = spec.hess(x).unwrap();
        for i in 0..x.len() {
            let mut p = x.to_vec();
            p[i] += h;
            let mut m = x.to_vec();
            m[i] -= h;
            let fd = (spec.value(&p).unwrap() - spec.value(&m).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 2e-7 * (1.0 + g[i].abs()), "grad axis {i}: {fd} vs {}", g[i]);
            for j in 0..x.len() {
                let gp = spec.grad(&p).unwrap()[j];
                let gm = spec.grad(&m).unwrap()[j];
                let fd2 = (gp - gm) / (2.0 * h);
                let hij = hs.get(i, j);
                assert!(
                    (fd2 - hij).abs() < 5e-6 * (1.0 + hij.abs()),
                    "hess ({i},{j}): {fd2} vs {hij}"
                );
            }
        }
    }

    #[test]
    fn derivative_formulas_match_differences() {
        let x = [0.7, 2.1, 4.4];
        fd_check(
            &FieldSpec::CosProduct {
                amplitude: 0.4,
                factors: vec![
                    CosFactor { axis: 0, freq: 1.0, phase: 0.2 },
                    CosFactor { axis: 2, freq: 2.0, phase: 0.0 },
                ],
            },
            &x,
        );
        fd_check(
            &FieldSpec::KinkProfile { axis: 1, kappa: 6.0, amplitude: 1.3, shift: 0.1 },
            &x,
        );
        fd_check(
            &FieldSpec::WarpedWells {
                center: vec![1.0, 2.0, 3.0],
                kappa: 4.0,
                amplitude: 0.2,
                offset: -2.0,
                gamma: default_gamma(),
            },
            &x,
        );
        fd_check(
            &FieldSpec::CosBump { center: vec![3.0, 3.0, 3.0], amplitude: 0.8, power: 4 },
            &x,
        );
        fd_check(
            &FieldSpec::Sum {
                terms: vec![
                    FieldSpec::sin_axis(0, 0.1, 1.0, 0.0),
                    FieldSpec::cos_axis(1, 0.05, 1.0, 0.0),
                ],
            },
            &x,
        );
    }

    #[test]
    fn kink_is_periodic_and_steep_at_the_seam() {
        let spec = FieldSpec::KinkProfile { axis: 0, kappa: 64.0, amplitude: 1.0, shift: 0.0 };
        let a = spec.value(&[0.1]).unwrap();
        let b = spec.value(&[0.1 + std::f64::consts::TAU]).unwrap();
        assert!((a - b).abs() < 1e-12);
        // Near s = 0 the warp expands by kappa, so the slope is ~ -kappa.
        let g0 = spec.grad(&[0.0]).unwrap()[0];
        assert!(g0 < -50.0, "slope at the seam {g0}");
        // Away from the seam the profile is nearly linear with slope ~ 1.
        let g_far = spec.grad(&[std::f64::consts::PI]).unwrap()[0];
        assert!((g_far - 1.0).abs() < 0.1, "far slope {g_far}");
    }

    #[test]
    fn wells_critical_points_cluster_near_the_center() {
        let kappa = 16.0;
        let spec = FieldSpec::WarpedWells {
            center: vec![2.0, 2.0],
            kappa,
            amplitude: 0.2,
            offset: -2.0,
            gamma: default_gamma(),
        };
        // Gradient vanishes only where warp(s) + gamma hits 0 or pi, i.e.
        // s = inverse-warp(+-pi/2), within 2*atan(1/kappa) of the center.
        let r = 2.0 * (1.0 / kappa).atan();
        for sgn in [-1.0, 1.0] {
            let s = 2.0 * ((sgn * (default_gamma() / 2.0).tan()) / kappa).atan();
            assert!(s.abs() <= r + 1e-12);
            let g = spec.grad(&[2.0 + s, 2.0 + s]).unwrap();
            assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12, "{g:?}");
        }
        // And is bounded away from zero on the far side of the torus.
        let g = spec.grad(&[2.0 + std::f64::consts::PI, 2.0]).unwrap();
        assert!(g[0].abs() > 1e-3, "{g:?}");
        // Everywhere at or below the ceiling offset + n*amplitude < -1.
        for t in 0..100 {
            let x = [0.0628 * t as f64, 0.1 * t as f64];
            assert!(spec.value(&x).unwrap() <= -2.0 + 2.0 * 0.2 + 1e-12);
        }
    }

    #[test]
    fn serde_round_trip() {
        let spec = FieldSpec::Sum {
            terms: vec![
                FieldSpec::constant(1.5),
                FieldSpec::KinkProfile { axis: 0, kappa: 256.0, amplitude: 2.4, shift: 0.19 },
            ],
        };
        let js = serde_json::to_string(&spec).unwrap();
        let back: FieldSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(back, spec);
        assert!(js.contains("\"kind\":\"kink_profile\""));
    }
}
