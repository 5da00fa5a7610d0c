use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numerics are generic over.
///
/// `f32` and `f64` both satisfy the bound; the extra supertraits are what the
/// samplers, reports and thread fan-out need.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + std::fmt::Debug
        + std::fmt::Display
        + Send
        + Sync
        + 'static
{
}

/// Shorthand for lifting an `f64` constant into the generic scalar.
///
/// Panics only if the literal is not representable, which for finite
/// constants in `f32`/`f64` never happens.
#[inline]
pub fn c<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("finite literal")
}

/// Lowers a generic scalar to `f64` for reports and serialization.
#[inline]
pub fn lower<F: Scalar>(x: F) -> f64 {
    x.to_f64().expect("scalar fits f64")
}
