//! Shared fixtures for the unit tests.

use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::field::SpectralField;
use crate::grid::FrequencyGrid;

/// sin(2πx) on a 1-d grid of cutoff `r`: coefficients ∓i/2 at ξ = ±1.
pub(crate) fn sine_1d(r: i64) -> SpectralField<f64> {
    let grid = FrequencyGrid::new(1, r).unwrap();
    SpectralField::from_fn(grid, 1, |_, xi| match xi[0] {
        1 => Complex::new(0.0, -0.5),
        -1 => Complex::new(0.0, 0.5),
        _ => Complex::new(0.0, 0.0),
    })
    .unwrap()
}

/// cos(2πx) on a 1-d grid of cutoff `r`: coefficients 1/2 at ξ = ±1.
pub(crate) fn cosine_1d(r: i64) -> SpectralField<f64> {
    let grid = FrequencyGrid::new(1, r).unwrap();
    SpectralField::from_fn(grid, 1, |_, xi| match xi[0] {
        1 | -1 => Complex::new(0.5, 0.0),
        _ => Complex::new(0.0, 0.0),
    })
    .unwrap()
}

/// A random Hermitian field with coefficients of order one, deterministic in
/// `seed`. Magnitudes decay mildly with |ξ| so norms stay comparable across
/// cutoffs.
pub(crate) fn random_hermitian(
    d: usize,
    r: i64,
    ncomp: usize,
    seed: u64,
) -> SpectralField<f64> {
    let grid = FrequencyGrid::new(d, r).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid, ncomp).unwrap();
    for c in 0..ncomp {
        for (i, xi) in grid.modes() {
            let decay = 1.0 / (1.0 + grid.norm_sq(i) as f64).sqrt();
            let re: f64 = rng.gen_range(-1.0..1.0);
            let im: f64 = rng.gen_range(-1.0..1.0);
            f.comp_mut(c)[i] = Complex::new(re * decay, im * decay);
            let _ = xi;
        }
        // Symmetrize: f̂(-ξ) := conj(f̂(ξ)) for ξ above the enumeration
        // midpoint, real part only at the self-mirrored center mode.
        let n = grid.len();
        let plane = f.comp_mut(c);
        for i in 0..n / 2 {
            plane[n - 1 - i] = plane[i].conj();
        }
        plane[n / 2] = Complex::new(plane[n / 2].re, 0.0);
    }
    f
}
