//! Scalar abstraction for the numerical core.
//!
//! Everything downstream (transforms, spectral solvers, simulators, PDE
//! stepping) is generic over [`Real`], so the same code runs in `f32` or
//! `f64`. Concrete `f64` aliases for the main types live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the whole crate: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Conversion from an `f64` literal or intermediate value.
    ///
    /// Lossy for `f32`; panics only on values with no finite/infinite
    /// representation, which cannot happen for the constants used here.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 value not representable in this scalar type")
    }

    /// Widening conversion used by the statistics helpers, which always
    /// accumulate in `f64`.
    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
