//! Fourier multipliers: diagonal (and one contracting) operators in
//! frequency space.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::real::Real;

/// A Fourier multiplier acting on spectral fields.
///
/// With the convention f̂(ξ) = ∫ f e^{-2πi ξ·x} dx, differentiation becomes
/// ∂_j ↦ 2πi ξ_j and the inertia operator L = (1 - Δ)^m becomes the symbol
/// (1 + 4π²|ξ|²)^m.
#[derive(Clone)]
pub enum FourierMultiplier<T: Real> {
    /// Symbol of L = (1 - Δ)^m: (1 + 4π²|ξ|²)^m.
    SobolevL { order: i32 },
    /// Symbol of R = L^{-1}: (1 + 4π²|ξ|²)^{-m}.
    RieszR { order: i32 },
    /// Symbol of ∂_j: 2πi ξ_j, applied componentwise.
    Partial { axis: usize },
    /// Contraction Σ_j 2πi ξ_j f̂_j(ξ), mapping a d-component field to a
    /// scalar; only valid inside [`apply_multiplier`].
    Divergence,
    /// Arbitrary user symbol ξ ↦ σ(ξ), applied componentwise.
    Custom(Arc<dyn Fn(&[i64]) -> Complex<T> + Send + Sync>),
}

impl<T: Real> fmt::Debug for FourierMultiplier<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SobolevL { order } => write!(f, "SobolevL(m={order})"),
            Self::RieszR { order } => write!(f, "RieszR(m={order})"),
            Self::Partial { axis } => write!(f, "Partial(axis={axis})"),
            Self::Divergence => write!(f, "Divergence"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl<T: Real> FourierMultiplier<T> {
    pub fn sobolev_l(order: i32) -> Self {
        Self::SobolevL { order }
    }

    pub fn riesz_r(order: i32) -> Self {
        Self::RieszR { order }
    }

    pub fn partial(axis: usize) -> Self {
        Self::Partial { axis }
    }

    pub fn divergence() -> Self {
        Self::Divergence
    }

    pub fn custom(f: impl Fn(&[i64]) -> Complex<T> + Send + Sync + 'static) -> Self {
        Self::Custom(Arc::new(f))
    }

    /// The scalar symbol at mode `xi`. `Divergence` has no scalar symbol and
    /// must go through [`apply_multiplier`].
    pub fn symbol(&self, xi: &[i64]) -> Complex<T> {
        match self {
            Self::SobolevL { order } => Complex::new(sobolev_symbol::<T>(xi, *order), T::zero()),
            Self::RieszR { order } => Complex::new(sobolev_symbol::<T>(xi, -*order), T::zero()),
            Self::Partial { axis } => Complex::new(T::zero(), T::two_pi() * T::of(xi[*axis] as f64)),
            Self::Divergence => panic!("Divergence contracts components; apply it via apply_multiplier"),
            Self::Custom(f) => f(xi),
        }
    }
}

/// (1 + 4π²|ξ|²)^order, the L/R symbol family.
#[inline]
pub(crate) fn sobolev_symbol<T: Real>(xi: &[i64], order: i32) -> T {
    let four_pi_sq = T::two_pi() * T::two_pi();
    let nsq: i64 = xi.iter().map(|x| x * x).sum();
    let base = T::one() + four_pi_sq * T::of(nsq as f64);
    base.powi(order)
}

/// Applies a multiplier to a field.
///
/// Componentwise kinds keep the component count; `Divergence` requires a
/// d-component field and yields a scalar with coefficients Σ_j 2πiξ_j f̂_j(ξ).
pub fn apply_multiplier<T: Real>(
    m: &FourierMultiplier<T>,
    f: &SpectralField<T>,
) -> Result<SpectralField<T>> {
    let grid = f.grid();
    match m {
        FourierMultiplier::Divergence => {
            let d = f.dim();
            if f.ncomp() != d {
                return Err(Error::WrongComponentCount { expected: d, got: f.ncomp() });
            }
            let mut out = SpectralField::zeros(grid, 1)?;
            for j in 0..d {
                let sym = FourierMultiplier::<T>::partial(j);
                let plane = f.comp(j);
                let dst = out.comp_mut(0);
                for (i, xi) in grid.modes() {
                    dst[i] += plane[i] * sym.symbol(&xi[..grid.dim()]);
                }
            }
            Ok(out)
        }
        FourierMultiplier::Partial { axis } if *axis >= grid.dim() => {
            Err(Error::BadConfig(format!(
                "partial derivative axis {axis} out of range for d = {}",
                grid.dim()
            )))
        }
        _ => {
            let mut out = f.clone();
            let n = grid.len();
            // The symbol depends only on the mode, so evaluate it once per
            // mode and sweep it across components.
            let mut symbols = vec![Complex::new(T::zero(), T::zero()); n];
            for (i, xi) in grid.modes() {
                symbols[i] = m.symbol(&xi[..grid.dim()]);
            }
            for c in 0..f.ncomp() {
                let plane = out.comp_mut(c);
                for i in 0..n {
                    plane[i] = plane[i] * symbols[i];
                }
            }
            out.ensure_finite("multiplier output")?;
            Ok(out)
        }
    }
}
