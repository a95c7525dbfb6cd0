//! Scalar abstractions.
//!
//! Two tiers: [`Scalar`] is enough for structural work (storage, Kronecker
//! products, the exact 1D mass/stiffness matrices) and is implemented for
//! `f32`, `f64` and the exact [`Rational`] type. [`Real`] adds the floating
//! point operations needed by solvers, quadrature and time stepping.

use num_rational::Ratio;
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Exact rational scalar used for bookkeeping that must not round.
pub type Rational = Ratio<i64>;

/// Field-like scalar usable as a sparse matrix entry.
pub trait Scalar:
    Num + Signed + Copy + PartialOrd + Debug + Display + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Entries for which this returns true are never stored.
    fn negligible(&self) -> bool;

    /// Equality up to the tolerance used for symmetry checks.
    fn sym_close(a: Self, b: Self) -> bool;

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("integer not representable in scalar type")
    }
}

impl Scalar for f64 {
    fn negligible(&self) -> bool {
        self.abs() < 1e-300
    }

    fn sym_close(a: Self, b: Self) -> bool {
        (a - b).abs() <= 1e-14 * a.abs().max(b.abs())
    }
}

impl Scalar for f32 {
    fn negligible(&self) -> bool {
        // f32 has no 1e-300; exact zero and subnormals are dropped
        self.abs() < f32::MIN_POSITIVE
    }

    fn sym_close(a: Self, b: Self) -> bool {
        (a - b).abs() <= 1e-6 * a.abs().max(b.abs())
    }
}

impl Scalar for Rational {
    fn negligible(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }

    fn sym_close(a: Self, b: Self) -> bool {
        a == b
    }
}

/// Floating point scalar for numerics.
pub trait Real: Scalar + Float + FloatConst + Sum + Default {
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant not representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {}
impl Real for f32 {}
