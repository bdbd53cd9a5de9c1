//! Exact convolution of bandlimited coefficient arrays.
//!
//! Two fields with modes in Z_{d,R} have a product supported in Z_{d,2R}.
//! Zero-extending both factors onto a circular grid of per-axis size
//! M ≥ 4R + 1 makes the circular convolution coincide with the exact linear
//! one on every requested output mode, so the FFT route introduces nothing
//! but roundoff. `convolve_direct` computes the same sums by brute force and
//! serves as the independent cross-check throughout the test suite.

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::FrequencyGrid;
use crate::real::Real;

/// Smallest integer ≥ `n` whose prime factors are all in {2, 3, 5}.
pub fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut rest = m;
        for p in [2usize, 3, 5] {
            while rest % p == 0 {
                rest /= p;
            }
        }
        if rest == 1 {
            return m;
        }
        m += 1;
    }
}

/// Per-axis circular grid size used to convolve two factors of cutoff `r`
/// exactly: the smallest 2-3-5-smooth integer ≥ 4R + 1.
pub fn conv_grid_len(r: i64) -> usize {
    next_fast_len((4 * r + 1) as usize)
}

/// Reusable FFT plans and scratch storage.
///
/// Purely a performance cache: it holds no state that influences results.
/// The integrator threads one workspace through a whole trajectory so plans
/// for a given size are built once; the standalone entry points create a
/// fresh one per call.
pub struct FftWorkspace<T: Real> {
    planner: FftPlanner<T>,
    scratch: Vec<Complex<T>>,
    rotate: Vec<Complex<T>>,
    pool: Vec<Vec<Complex<T>>>,
}

impl<T: Real> Default for FftWorkspace<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> FftWorkspace<T> {
    pub fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
            scratch: Vec::new(),
            rotate: Vec::new(),
            pool: Vec::new(),
        }
    }

    /// Borrows a zeroed buffer of length `len` from the pool.
    pub(crate) fn take_zeroed(&mut self, len: usize) -> Vec<Complex<T>> {
        let mut buf = self.pool.pop().unwrap_or_default();
        buf.clear();
        buf.resize(len, Complex::new(T::zero(), T::zero()));
        buf
    }

    pub(crate) fn give_back(&mut self, buf: Vec<Complex<T>>) {
        self.pool.push(buf);
    }

    fn plan(&mut self, len: usize, inverse: bool) -> Arc<dyn Fft<T>> {
        if inverse {
            self.planner.plan_fft_inverse(len)
        } else {
            self.planner.plan_fft_forward(len)
        }
    }

    /// In-place multidimensional DFT over a row-major array of shape `dims`
    /// (axis 0 slowest). Unnormalized in both directions, matching the
    /// synthesis convention f(x_n) = Σ_ξ f̂(ξ) e^{2πi ξ·n/M}; callers divide
    /// by the grid size after a forward (analysis) pass.
    ///
    /// Each pass transforms the contiguous last axis in batch, then rotates
    /// the axes right, so after `dims.len()` passes every axis is
    /// transformed and the original layout is restored.
    pub(crate) fn fft_nd(&mut self, data: &mut [Complex<T>], dims: &[usize], inverse: bool) {
        debug_assert_eq!(data.len(), dims.iter().product::<usize>());
        let d = dims.len();
        let mut shape: Vec<usize> = dims.to_vec();
        for _ in 0..d {
            let len = *shape.last().expect("nonempty shape");
            let plan = self.plan(len, inverse);
            let need = plan.get_inplace_scratch_len();
            if self.scratch.len() < need {
                self.scratch.resize(need, Complex::new(T::zero(), T::zero()));
            }
            plan.process_with_scratch(data, &mut self.scratch[..need]);
            if d == 1 {
                return;
            }
            // Rotate axes right: viewing the array as (rows, len), write the
            // transpose (len, rows). The leading axes keep their relative
            // order, so d rotations restore the layout.
            let rows = data.len() / len;
            self.rotate.clear();
            self.rotate.resize(data.len(), Complex::new(T::zero(), T::zero()));
            for r in 0..rows {
                for c in 0..len {
                    self.rotate[c * rows + r] = data[r * len + c];
                }
            }
            data.copy_from_slice(&self.rotate);
            shape.rotate_right(1);
        }
    }

    /// Zero-embeds one coefficient plane onto the circular grid (mode ξ at
    /// per-axis position ξ mod M) and synthesizes its samples in place.
    pub(crate) fn synthesize_plane(
        &mut self,
        plane: &[Complex<T>],
        grid: FrequencyGrid,
        m: usize,
    ) -> Vec<Complex<T>> {
        let d = grid.dim();
        let total = m.pow(d as u32);
        let mut buf = self.take_zeroed(total);
        embed_plane(plane, grid, m, &mut buf);
        self.fft_nd(&mut buf, &vec![m; d], true);
        buf
    }

    /// Forward-transforms circular-grid samples and reads off the modes of
    /// the output cube, dividing by the grid size.
    pub(crate) fn analyze_plane(
        &mut self,
        samples: &mut [Complex<T>],
        out_grid: FrequencyGrid,
        m: usize,
    ) -> Vec<Complex<T>> {
        let d = out_grid.dim();
        self.fft_nd(samples, &vec![m; d], false);
        let scale = T::one() / T::of((m.pow(d as u32)) as f64);
        let mut out = vec![Complex::new(T::zero(), T::zero()); out_grid.len()];
        for (i, xi) in out_grid.modes() {
            out[i] = samples[circular_index(&xi[..d], m)].scale(scale);
        }
        out
    }
}

/// Flat index of mode ξ on the circular grid: per-axis ξ mod M, row-major.
#[inline]
pub(crate) fn circular_index(xi: &[i64], m: usize) -> usize {
    let mm = m as i64;
    let mut idx = 0usize;
    for &x in xi {
        idx = idx * m + (x.rem_euclid(mm)) as usize;
    }
    idx
}

pub(crate) fn embed_plane<T: Real>(
    plane: &[Complex<T>],
    grid: FrequencyGrid,
    m: usize,
    out: &mut [Complex<T>],
) {
    let d = grid.dim();
    for (i, xi) in grid.modes() {
        out[circular_index(&xi[..d], m)] = plane[i];
    }
}

/// Resolves the component broadcast for a convolution: scalar factors sweep
/// across the other field's components, equal counts pair up.
fn broadcast(nf: usize, ng: usize) -> Result<Vec<(usize, usize)>> {
    if nf == ng {
        Ok((0..nf).map(|c| (c, c)).collect())
    } else if nf == 1 {
        Ok((0..ng).map(|c| (0, c)).collect())
    } else if ng == 1 {
        Ok((0..nf).map(|c| (c, 0)).collect())
    } else {
        Err(Error::ComponentMismatch(nf, ng))
    }
}

fn check_conv_args<T: Real>(
    f: &SpectralField<T>,
    g: &SpectralField<T>,
    r_out: i64,
) -> Result<FrequencyGrid> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch {
            d1: f.dim(),
            r1: f.grid().cutoff(),
            d2: g.dim(),
            r2: g.grid().cutoff(),
        });
    }
    let limit = 2 * f.grid().cutoff();
    if r_out > limit {
        return Err(Error::CutoffTooLarge { requested: r_out, limit });
    }
    FrequencyGrid::new(f.dim(), r_out)
}

/// (f̂ * ĝ)(ξ) = Σ_ζ f̂(ζ) ĝ(ξ - ζ) for ξ ∈ Z_{d,r_out}, via one circular
/// FFT convolution per component pair. Exact up to roundoff for
/// r_out ≤ 2·cutoff.
pub fn convolve_fft<T: Real>(
    f: &SpectralField<T>,
    g: &SpectralField<T>,
    r_out: i64,
) -> Result<SpectralField<T>> {
    let mut ws = FftWorkspace::new();
    convolve_fft_ws(f, g, r_out, &mut ws)
}

/// [`convolve_fft`] with caller-provided plan/buffer cache.
pub fn convolve_fft_ws<T: Real>(
    f: &SpectralField<T>,
    g: &SpectralField<T>,
    r_out: i64,
    ws: &mut FftWorkspace<T>,
) -> Result<SpectralField<T>> {
    let out_grid = check_conv_args(f, g, r_out)?;
    let pairs = broadcast(f.ncomp(), g.ncomp())?;
    let grid = f.grid();
    let d = grid.dim();
    let m = conv_grid_len(grid.cutoff());
    let total = m.pow(d as u32);

    let synth_f: Vec<_> = (0..f.ncomp())
        .map(|c| ws.synthesize_plane(f.comp(c), grid, m))
        .collect();
    let synth_g: Vec<_> = (0..g.ncomp())
        .map(|c| ws.synthesize_plane(g.comp(c), grid, m))
        .collect();

    let mut coeffs = Vec::with_capacity(pairs.len() * out_grid.len());
    let mut prod = ws.take_zeroed(total);
    for &(cf, cg) in &pairs {
        for i in 0..total {
            prod[i] = synth_f[cf][i] * synth_g[cg][i];
        }
        coeffs.extend_from_slice(&ws.analyze_plane(&mut prod, out_grid, m));
    }
    ws.give_back(prod);
    for b in synth_f.into_iter().chain(synth_g) {
        ws.give_back(b);
    }
    SpectralField::from_coeffs(out_grid, pairs.len(), coeffs)
}

/// Brute-force evaluation of the same sums, O(|Z_{d,r_out}|·|Z_{d,R}|) per
/// component pair. The independent oracle for [`convolve_fft`]; never called
/// from the solver path.
pub fn convolve_direct<T: Real>(
    f: &SpectralField<T>,
    g: &SpectralField<T>,
    r_out: i64,
) -> Result<SpectralField<T>> {
    let out_grid = check_conv_args(f, g, r_out)?;
    let pairs = broadcast(f.ncomp(), g.ncomp())?;
    let grid = f.grid();
    let d = grid.dim();

    let mut out = SpectralField::zeros(out_grid, pairs.len())?;
    for (c, &(cf, cg)) in pairs.iter().enumerate() {
        let fp = f.comp(cf);
        for (oi, xi) in out_grid.modes() {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (fi, zeta) in grid.modes() {
                let diff = [xi[0] - zeta[0], xi[1] - zeta[1], xi[2] - zeta[2]];
                if let Some(gi) = grid.index_of(&diff[..d]) {
                    acc += fp[fi] * g.comp(cg)[gi];
                }
            }
            out.comp_mut(c)[oi] = acc;
        }
    }
    Ok(out)
}
