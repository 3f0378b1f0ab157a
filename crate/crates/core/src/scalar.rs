//! Floating-point abstraction for the deterministic numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Scalar type the drift, barrier, solver, and bound kernels are generic
/// over. Implemented for `f32` and `f64`; the crate root exports `f64`
/// aliases for everyday use.
///
/// The Monte Carlo lane is deliberately *not* generic: simulation
/// accumulates in `f64` regardless of the solver scalar.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }

    /// Widens to `f64` (exact for `f32` and `f64`).
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    /// Converts a grid index into this scalar type.
    fn of_usize(i: usize) -> Self {
        Self::from_usize(i).expect("index not representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
