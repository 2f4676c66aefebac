//! Scalar abstraction shared by the geometry, registration and codec modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar the mesh pipeline is generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + FromStr + Send + Sync + 'static
{
    /// Converts a literal; every literal used in the crate is representable.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal fits scalar type")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize fits scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Rounds through `f32`, the wire precision of the stream format.
    #[inline]
    fn to_wire(self) -> f32 {
        self.to_f32().unwrap_or(f32::NAN)
    }

    #[inline]
    fn from_wire(v: f32) -> Self {
        Self::from_f32(v).expect("f32 fits scalar type")
    }

    /// Rounds a value to what survives a trip through the wire format.
    #[inline]
    fn wire_round(self) -> Self {
        Self::from_wire(self.to_wire())
    }
}

impl Real for f32 {}
impl Real for f64 {}
