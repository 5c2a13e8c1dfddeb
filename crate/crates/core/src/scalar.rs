//! Scalar abstraction: every numeric kernel is generic over `Scalar`,
//! implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum<Self>
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` constant, panicking only for non-finite inputs
    /// (which would indicate a bug at the call site, not bad data).
    fn from_f64_lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 literal")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lit(v: usize) -> Self {
        Self::from_usize(v).expect("usize fits scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
