//! Floating-point scalar abstraction.
//!
//! Every real-valued quantity carried by agent state (samples, estimates,
//! size estimates) is generic over [`Scalar`]. The simulator is normally run
//! with `f64`; `f32` is supported for experiments on reduced precision.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real number type usable by the protocols.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// Width of the binary representation, used for message-size accounting.
    const BITS: u32;

    /// Lossy conversion from `f64`, for configuration values.
    fn of(value: f64) -> Self;

    /// Lossy conversion from a count.
    fn of_usize(value: usize) -> Self;

    fn to_f64_lossy(self) -> f64;
}

macro_rules! impl_scalar {
    ($t:ty, $bits:expr) => {
        impl Scalar for $t {
            const BITS: u32 = $bits;

            #[inline]
            fn of(value: f64) -> Self {
                value as $t
            }

            #[inline]
            fn of_usize(value: usize) -> Self {
                value as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32, 32);
impl_scalar!(f64, 64);

/// Left-to-right sum. Agents holding identical vectors obtain bit-identical
/// sums, which the agreement checks rely on.
#[inline]
pub fn sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}
