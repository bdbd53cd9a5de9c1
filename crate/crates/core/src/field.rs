//! Bandlimited fields stored as dense Fourier coefficients.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::real::Real;

/// A real-valued scalar or vector field on T^d, represented by the complex
/// Fourier coefficients of its modes on a [`FrequencyGrid`].
///
/// Convention: f(x) = Σ_ξ f̂(ξ) e^{2πi ξ·x}, so real fields satisfy the
/// Hermitian symmetry f̂(-ξ) = conj(f̂(ξ)). Construction accepts arbitrary
/// complex data (several oracles need non-symmetric inputs, e.g. a single
/// Kronecker mode); the dynamics layer checks and maintains symmetry.
///
/// Storage is dense and component-major: coefficient of component `c` at
/// flat mode index `i` lives at `coeffs[c * grid.len() + i]`. A scalar field
/// has `ncomp = 1`, a velocity/momentum field `ncomp = d`; intermediate
/// objects (e.g. a full Jacobian with d² entries) are allowed as well.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField<T: Real> {
    grid: FrequencyGrid,
    ncomp: usize,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> SpectralField<T> {
    /// The zero field with `ncomp` components.
    pub fn zeros(grid: FrequencyGrid, ncomp: usize) -> Result<Self> {
        if ncomp == 0 {
            return Err(Error::WrongComponentCount { expected: 1, got: 0 });
        }
        Ok(Self {
            grid,
            ncomp,
            coeffs: vec![Complex::new(T::zero(), T::zero()); ncomp * grid.len()],
        })
    }

    /// Builds a field from a coefficient function of (component, mode).
    pub fn from_fn(
        grid: FrequencyGrid,
        ncomp: usize,
        mut f: impl FnMut(usize, [i64; 3]) -> Complex<T>,
    ) -> Result<Self> {
        let mut out = Self::zeros(grid, ncomp)?;
        for c in 0..ncomp {
            for (i, xi) in grid.modes() {
                out.coeffs[c * grid.len() + i] = f(c, xi);
            }
        }
        out.ensure_finite("field coefficients")?;
        Ok(out)
    }

    /// Wraps raw component-major coefficients; `coeffs.len()` must equal
    /// `ncomp * grid.len()` and every entry must be finite.
    pub fn from_coeffs(grid: FrequencyGrid, ncomp: usize, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if ncomp == 0 || coeffs.len() != ncomp * grid.len() {
            return Err(Error::WrongComponentCount {
                expected: ncomp.max(1) * grid.len(),
                got: coeffs.len(),
            });
        }
        let out = Self { grid, ncomp, coeffs };
        out.ensure_finite("field coefficients")?;
        Ok(out)
    }

    #[inline]
    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    #[inline]
    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    /// All coefficients of one component, in mode-enumeration order.
    #[inline]
    pub fn comp(&self, c: usize) -> &[Complex<T>] {
        let n = self.grid.len();
        &self.coeffs[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex<T>] {
        let n = self.grid.len();
        &mut self.coeffs[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    /// Coefficient of component `c` at mode `xi`; zero outside the grid.
    pub fn at(&self, c: usize, xi: &[i64]) -> Complex<T> {
        match self.grid.index_of(xi) {
            Some(i) => self.comp(c)[i],
            None => Complex::new(T::zero(), T::zero()),
        }
    }

    pub fn set(&mut self, c: usize, xi: &[i64], value: Complex<T>) {
        let i = self.grid.index(xi);
        self.comp_mut(c)[i] = value;
    }

    /// Extracts component `c` as a scalar field.
    pub fn component(&self, c: usize) -> Self {
        Self {
            grid: self.grid,
            ncomp: 1,
            coeffs: self.comp(c).to_vec(),
        }
    }

    /// Largest coefficient magnitude over all components (∞-norm proxy).
    pub fn max_abs(&self) -> T {
        self.coeffs
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), T::max)
            .sqrt()
    }

    pub(crate) fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { what })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.ensure_finite("").is_ok()
    }

    /// Maximum of |f̂(ξ) - conj(f̂(-ξ))| over all modes and components,
    /// normalized by the largest coefficient magnitude (0 for a zero field).
    pub fn hermitian_drift(&self) -> T {
        let scale = self.max_abs();
        if scale == T::zero() {
            return T::zero();
        }
        let mut worst = T::zero();
        let n = self.grid.len();
        for c in 0..self.ncomp {
            let plane = &self.coeffs[c * n..(c + 1) * n];
            for i in 0..n {
                let diff = plane[i] - plane[self.grid.mirror(i)].conj();
                worst = worst.max(diff.norm_sqr());
            }
        }
        worst.sqrt() / scale
    }

    /// Largest absolute deviation |f̂(ξ) − conj(f̂(−ξ))| from Hermitian
    /// symmetry, in coefficient units.
    pub fn hermitian_drift_abs(&self) -> T {
        let mut worst = T::zero();
        let n = self.grid.len();
        for c in 0..self.ncomp {
            let plane = &self.coeffs[c * n..(c + 1) * n];
            for i in 0..n {
                let diff = plane[i] - plane[self.grid.mirror(i)].conj();
                worst = worst.max(diff.norm_sqr());
            }
        }
        worst.sqrt()
    }

    /// Restores exact Hermitian symmetry by averaging each coefficient with
    /// the conjugate of its mirror. `tol_abs` is an absolute bound on the
    /// tolerable asymmetry: callers scale it by the amplitude at which the
    /// coefficients were produced, so that a field whose exact value is zero
    /// is judged against the roundoff of the computation that made it, not
    /// against its own noise floor. Drift beyond the bound signals an
    /// internal inconsistency and is reported instead of silently repaired.
    pub fn symmetrize(&mut self, tol_abs: T) -> Result<()> {
        let drift = self.hermitian_drift_abs();
        if drift > tol_abs {
            return Err(Error::HermitianDrift {
                drift: drift.to_f64().unwrap_or(f64::NAN),
                tol: tol_abs.to_f64().unwrap_or(f64::NAN),
            });
        }
        let half = T::of(0.5);
        let n = self.grid.len();
        for c in 0..self.ncomp {
            let plane = &mut self.coeffs[c * n..(c + 1) * n];
            for i in 0..n {
                let j = self.grid.mirror(i);
                if j < i {
                    continue;
                }
                let avg = (plane[i] + plane[j].conj()).scale(half);
                plane[i] = avg;
                plane[j] = avg.conj();
            }
        }
        Ok(())
    }

    /// Copies this field onto a grid with cutoff `r`: coefficients shared
    /// with the new cube are kept, modes outside it are dropped (r < R) or
    /// zero (r > R).
    pub fn resized(&self, r: i64) -> Result<Self> {
        let target = FrequencyGrid::new(self.dim(), r)?;
        if target == self.grid {
            return Ok(self.clone());
        }
        let mut out = Self::zeros(target, self.ncomp)?;
        let (small, big_is_self) = if r < self.grid.cutoff() { (target, true) } else { (self.grid, false) };
        for c in 0..self.ncomp {
            for (_, xi) in small.modes() {
                let v = if big_is_self {
                    self.comp(c)[self.grid.index(&xi)]
                } else {
                    self.comp(c)[small.index(&xi)]
                };
                out.comp_mut(c)[target.index(&xi)] = v;
            }
        }
        Ok(out)
    }

    /// self += alpha * other (grids and component counts must match).
    pub fn axpy(&mut self, alpha: T, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b.scale(alpha);
        }
        Ok(())
    }

    pub fn scale_in_place(&mut self, alpha: T) {
        for a in &mut self.coeffs {
            *a = a.scale(alpha);
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        let mut out = self.clone();
        out.scale_in_place(alpha);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(T::one(), other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-T::one(), other)?;
        Ok(out)
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                d1: self.dim(),
                r1: self.grid.cutoff(),
                d2: other.dim(),
                r2: other.grid.cutoff(),
            });
        }
        if self.ncomp != other.ncomp {
            return Err(Error::ComponentMismatch(self.ncomp, other.ncomp));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::testutil::sine_1d;

    fn grid(d: usize, r: i64) -> FrequencyGrid {
        FrequencyGrid::new(d, r).unwrap()
    }

    #[test]
    fn hermitian_drift_detects_asymmetry() {
        let f = sine_1d(2);
        assert!(f.hermitian_drift() == 0.0);

        let mut g = f.clone();
        g.set(0, &[1], Complex::new(0.25, -0.5));
        assert!(g.hermitian_drift() > 0.1);
        assert!(g.symmetrize(1e-10).is_err());
    }

    #[test]
    fn symmetrize_averages_with_mirror() {
        let mut f = SpectralField::<f64>::zeros(grid(1, 1), 1).unwrap();
        // Slightly perturbed conjugate pair, drift within tolerance.
        f.set(0, &[1], Complex::new(1.0, 2.0 + 1e-13));
        f.set(0, &[-1], Complex::new(1.0 + 2e-13, -2.0));
        f.symmetrize(1e-10).unwrap();
        assert_eq!(f.at(0, &[1]), f.at(0, &[-1]).conj());
        assert!((f.at(0, &[1]).re - 1.0).abs() < 1e-12);
        // The zero mode must stay real after symmetrization of a real field.
        f.set(0, &[0], Complex::new(3.0, 1e-12));
        f.symmetrize(1e-10).unwrap();
        assert_eq!(f.at(0, &[0]).im, 0.0);
    }

    #[test]
    fn resize_round_trips_through_a_larger_grid() {
        let f = sine_1d(1);
        let padded = f.resized(4).unwrap();
        assert_eq!(padded.grid().cutoff(), 4);
        assert_eq!(padded.at(0, &[1]), f.at(0, &[1]));
        assert_eq!(padded.at(0, &[3]), Complex::new(0.0, 0.0));
        let back = padded.resized(1).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn axpy_rejects_shape_mismatches() {
        let mut f = SpectralField::<f64>::zeros(grid(2, 2), 2).unwrap();
        let g = SpectralField::<f64>::zeros(grid(2, 3), 2).unwrap();
        assert!(f.axpy(1.0, &g).is_err());
        let h = SpectralField::<f64>::zeros(grid(2, 2), 1).unwrap();
        assert!(f.axpy(1.0, &h).is_err());
    }

    #[test]
    fn non_finite_coefficients_are_rejected() {
        let bad = SpectralField::from_coeffs(
            grid(1, 0),
            1,
            vec![Complex::new(f64::NAN, 0.0)],
        );
        assert!(bad.is_err());
    }
}
