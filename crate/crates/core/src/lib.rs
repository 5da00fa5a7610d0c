//! Convex-cone calculus for symmetric fully nonlinear operators, the
//! uniform-ellipticity transform, conformal curvature identities, admissible
//! conformal-factor constructions, and desk-scale Newton solvers on
//! structured grids.
//!
//! Everything numerical is generic over the scalar type (`f32`/`f64`) through
//! the [`Scalar`] trait; `Real` and the aliases at the crate root pin the
//! default double-precision instantiations.

pub mod cones;
pub mod error;
pub mod geom;
pub mod io;
pub mod linalg;
pub mod scalar;
pub mod solver;
pub mod symfunc;

pub use error::{CclError, Result};
pub use scalar::Scalar;

/// Default scalar used by the CLI and the report types.
pub type Real = f64;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use cones::{ConeInvariants, ConeSpec, ConeType, MembershipClass, MembershipVerdict};
pub use geom::fields::FieldSpec;
pub use geom::grid::{AxisKind, Grid, ScalarField, SymTensorField};
pub use geom::Manifold;
pub use symfunc::{EllipticityCertificate, SymmetricFunctionSpec, TransformedOperator};

/// Verdict for a point relative to an open cone, instantiated at `Real`.
pub type Verdict = MembershipVerdict<Real>;
