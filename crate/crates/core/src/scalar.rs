//! Floating-point scalar abstraction shared by every numeric module.
//!
//! All enclosure code is written against [`Scalar`] so that the same
//! interval, polynomial and reachability machinery runs in `f32` or `f64`.
//! Besides the usual [`num_traits::Float`] surface, a scalar has to expose
//! its neighbouring representable values, which is what outward rounding
//! is built on.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Default + Sum + Send + Sync + 'static + crate::poly::Coeff
{
    /// Number of explicit mantissa bits.
    const MANTISSA_BITS: i32;

    /// Smallest representable value strictly greater than `self`.
    fn next_up(self) -> Self;

    /// Largest representable value strictly less than `self`.
    fn next_down(self) -> Self;

    /// Converts an `f64` literal, rounding to nearest.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("representable count")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Magnitude below which products and quotients may have lost bits to
    /// gradual underflow, so error-free transformations are not trusted.
    #[inline]
    fn tiny_threshold() -> Self {
        Self::min_positive_value() * Self::lit(2f64.powi(Self::MANTISSA_BITS + 2))
    }
}

macro_rules! impl_scalar {
    ($t:ty, $bits:ty, $mant:expr) => {
        impl Scalar for $t {
            const MANTISSA_BITS: i32 = $mant;

            #[inline]
            fn next_up(self) -> Self {
                if self.is_nan() || self == <$t>::INFINITY {
                    return self;
                }
                if self == 0.0 {
                    return <$t>::from_bits(1);
                }
                let bits = self.to_bits();
                if self > 0.0 {
                    <$t>::from_bits(bits + 1)
                } else {
                    <$t>::from_bits(bits - 1)
                }
            }

            #[inline]
            fn next_down(self) -> Self {
                -(-self).next_up()
            }
        }
    };
}

impl_scalar!(f64, u64, 52);
impl_scalar!(f32, u32, 23);
