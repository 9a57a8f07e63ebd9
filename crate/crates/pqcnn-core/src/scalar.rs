use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::AddAssign;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar the simulator is generic over: `f32` or `f64`.
///
/// The associated tolerances scale with the precision of the type; the `f64`
/// values are the ones the validation contracts are stated in.
pub trait Real:
    Float + FloatConst + FromPrimitive + Sum + AddAssign + Debug + Display + Send + Sync + 'static
{
    /// Tolerance for normalization, trace and hermiticity checks.
    const CHECK_TOL: Self;
    /// Tolerance for unitarity of permanent-lifted subspace matrices.
    const LIFT_TOL: Self;
    /// Slack allowed for small negative eigenvalues of density operators.
    const PSD_TOL: Self;
}

impl Real for f32 {
    const CHECK_TOL: Self = 1e-4;
    const LIFT_TOL: Self = 1e-2;
    const PSD_TOL: Self = 1e-3;
}

impl Real for f64 {
    const CHECK_TOL: Self = 1e-10;
    const LIFT_TOL: Self = 1e-8;
    const PSD_TOL: Self = 1e-9;
}

/// Shorthand for a purely real complex number.
pub(crate) fn cr<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}
