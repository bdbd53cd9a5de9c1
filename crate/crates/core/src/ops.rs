//! Truncation and Sobolev norms.

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::real::Real;

/// Which equivalent H^k weight to sum against.
///
/// Both define the same topology; they differ by mode-dependent constants
/// bounded on either side, so estimates proved with one transfer to the
/// other. `PowerOfSum` is the default everywhere in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SobolevWeight {
    /// (1 + |ξ|²)^k
    #[default]
    PowerOfSum,
    /// 1 + |ξ|^{2k}
    SumOfPowers,
}

impl SobolevWeight {
    #[inline]
    pub fn eval<T: Real>(self, norm_sq: i64, k: T) -> T {
        let nsq = T::of(norm_sq as f64);
        match self {
            SobolevWeight::PowerOfSum => (T::one() + nsq).powf(k),
            SobolevWeight::SumOfPowers => T::one() + nsq.powf(k),
        }
    }
}

/// Orthogonal projection Π_r onto the modes with |ξ|∞ ≤ r. Requires
/// r ≤ cutoff(f); to zero-pad onto a larger grid use
/// [`SpectralField::resized`].
pub fn truncate<T: Real>(f: &SpectralField<T>, r: i64) -> Result<SpectralField<T>> {
    if r < 0 {
        return Err(Error::BadCutoff(r));
    }
    if r > f.grid().cutoff() {
        return Err(Error::CutoffTooLarge { requested: r, limit: f.grid().cutoff() });
    }
    f.resized(r)
}

/// ‖f‖_{H^k} = (Σ_i Σ_ξ |f̂_i(ξ)|² w_k(ξ))^{1/2} with the chosen weight.
/// Negative and fractional `k` are fine; `k = 0` is the plain ℓ² norm, which
/// by Parseval equals the L² norm of the synthesized field.
pub fn sobolev_norm<T: Real>(f: &SpectralField<T>, k: T, weight: SobolevWeight) -> T {
    let grid = f.grid();
    let n = grid.len();
    // Weights depend only on |ξ|², so compute them once per mode.
    let mut w = vec![T::zero(); n];
    for i in 0..n {
        w[i] = weight.eval(grid.norm_sq(i), k);
    }
    let mut acc = T::zero();
    for c in 0..f.ncomp() {
        let plane = f.comp(c);
        for i in 0..n {
            acc = acc + plane[i].norm_sqr() * w[i];
        }
    }
    acc.sqrt()
}
