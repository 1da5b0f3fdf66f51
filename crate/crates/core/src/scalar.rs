//! Floating-point abstraction for the numeric core.

use rand::distributions::uniform::SampleUniform;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Scalar type the model runs on.
///
/// Everything downstream of data loading is generic over this trait so the same
/// code paths serve `f32` and `f64`; the serialization formats and the CLI pin
/// `f64`. Beyond the arithmetic supplied by [`num_traits::Float`] it adds the
/// two random draws training needs and an infallible conversion from `f64`
/// literals (used for constants such as optimizer betas).
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssignOps
    + SampleUniform
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Draw from the standard normal distribution.
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Convert an `f64` constant, panicking only for values unrepresentable in
    /// `Self` (which none of the crate's constants are).
    fn cast(value: f64) -> Self {
        num_traits::FromPrimitive::from_f64(value).expect("constant representable in scalar type")
    }

    /// Lossy view as `f64`, used for reporting and serialization.
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for f64 {
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

/// Dot product of two equal-length slices.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `dst += a * x`, element-wise.
#[inline]
pub fn axpy<T: Scalar>(dst: &mut [T], a: T, x: &[T]) {
    debug_assert_eq!(dst.len(), x.len());
    for (d, &xi) in dst.iter_mut().zip(x) {
        *d += a * xi;
    }
}

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}
