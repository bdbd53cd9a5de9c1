//! Scalar abstraction.
//!
//! Everything numeric in this crate is generic over a real scalar so the
//! library can be instantiated at `f32` or `f64`. The crate-root aliases
//! (`Field64`, …) pick `f64`, and every tolerance quoted in the operation
//! docs refers to the `f64` instantiation.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, ToPrimitive};
use rustfft::FftNum;

/// Real scalar usable for spectral fields, dynamics and time integration.
///
/// The bounds are exactly what the implementation needs: ordinary float
/// arithmetic, π, conversion from `f64` literals (Butcher coefficients,
/// tolerances, RNG draws), and FFT support via `rustfft`.
pub trait Real: Float + FloatConst + FromPrimitive + ToPrimitive + NumAssignOps + FftNum {
    /// Converts an `f64` constant. Panics only if the target type cannot
    /// represent ordinary finite values, which neither provided
    /// instantiation does.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant must convert")
    }

    /// Two times π, the phase factor of the Fourier convention
    /// f̂(ξ) = ∫ f(x) e^{-2πi ξ·x} dx.
    #[inline]
    fn two_pi() -> Self {
        Self::PI() + Self::PI()
    }

    /// Machine epsilon expressed as `f64`, used to scale internal
    /// consistency tolerances so that the documented `f64` values hold
    /// verbatim while `f32` gets proportionally looser checks.
    #[inline]
    fn eps_f64() -> f64 {
        Self::epsilon().to_f64().expect("epsilon converts")
    }

    /// A tolerance quoted for `f64`, rescaled by the ratio of machine
    /// epsilons so it expresses the same number of ulps at every precision.
    #[inline]
    fn scaled_tol(tol_f64: f64) -> Self {
        Self::of(tol_f64 * Self::eps_f64() / f64::EPSILON)
    }
}

impl Real for f32 {}
impl Real for f64 {}
