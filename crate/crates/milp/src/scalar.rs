use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the solver and the domain model are generic over.
///
/// The tolerance constants are the defaults the simplex and the
/// branch-and-bound use for this precision. `f64` carries the values the
/// rest of the crate is tuned for; `f32` is usable on small, well-scaled
/// problems only.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Absolute primal feasibility tolerance of the simplex.
    const PRIMAL_TOL: f64;
    /// Absolute dual feasibility (optimality) tolerance of the simplex.
    const DUAL_TOL: f64;
    /// Smallest pivot element accepted by a ratio test.
    const PIVOT_TOL: f64;
    /// Entries below this magnitude are flushed to zero in tableau updates.
    const DROP_TOL: f64;

    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const PRIMAL_TOL: f64 = 1e-9;
    const DUAL_TOL: f64 = 1e-9;
    const PIVOT_TOL: f64 = 1e-9;
    const DROP_TOL: f64 = 1e-13;
}

impl Scalar for f32 {
    const PRIMAL_TOL: f64 = 1e-5;
    const DUAL_TOL: f64 = 1e-5;
    const PIVOT_TOL: f64 = 1e-5;
    const DROP_TOL: f64 = 1e-7;
}
