//! Truncated frequency lattices on the flat torus T^d = [0,1)^d.

use crate::error::{Error, Result};

/// The symmetric frequency cube Z_{d,R} = {ξ ∈ Z^d : |ξ|_∞ ≤ R}.
///
/// Modes are enumerated in row-major order: axis 0 varies slowest, the last
/// axis fastest, and each axis runs -R, -R+1, …, R. The enumeration is the
/// canonical ordering used everywhere a field is serialized or iterated, so
/// `index` and `xi` are exact inverses of each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrequencyGrid {
    d: usize,
    r: i64,
}

impl FrequencyGrid {
    /// Creates the grid for dimension `d` ∈ {1, 2, 3} and cutoff `r` ≥ 0.
    pub fn new(d: usize, r: i64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::BadDimension(d));
        }
        if r < 0 {
            return Err(Error::BadCutoff(r));
        }
        Ok(Self { d, r })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn cutoff(&self) -> i64 {
        self.r
    }

    /// Modes per axis, 2R + 1.
    #[inline]
    pub fn axis_len(&self) -> usize {
        (2 * self.r + 1) as usize
    }

    /// Total number of modes, (2R + 1)^d.
    #[inline]
    pub fn len(&self) -> usize {
        self.axis_len().pow(self.d as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false // (2R+1)^d ≥ 1 always; provided for clippy symmetry with len()
    }

    /// Flat index of a mode, or `None` if it lies outside the cube.
    ///
    /// Only the first `d` entries of `xi` are read.
    #[inline]
    pub fn index_of(&self, xi: &[i64]) -> Option<usize> {
        let n = self.axis_len();
        let mut idx = 0usize;
        for k in 0..self.d {
            let x = xi[k];
            if x.abs() > self.r {
                return None;
            }
            idx = idx * n + (x + self.r) as usize;
        }
        Some(idx)
    }

    /// Flat index of a mode known to lie inside the cube.
    #[inline]
    pub fn index(&self, xi: &[i64]) -> usize {
        debug_assert!(xi[..self.d].iter().all(|x| x.abs() <= self.r));
        let n = self.axis_len();
        let mut idx = 0usize;
        for k in 0..self.d {
            idx = idx * n + (xi[k] + self.r) as usize;
        }
        idx
    }

    /// The mode at flat index `idx`. Unused trailing entries are zero.
    #[inline]
    pub fn xi(&self, idx: usize) -> [i64; 3] {
        debug_assert!(idx < self.len());
        let n = self.axis_len();
        let mut out = [0i64; 3];
        let mut rest = idx;
        for k in (0..self.d).rev() {
            out[k] = (rest % n) as i64 - self.r;
            rest /= n;
        }
        out
    }

    /// |ξ|² of the mode at flat index `idx`.
    #[inline]
    pub fn norm_sq(&self, idx: usize) -> i64 {
        let xi = self.xi(idx);
        xi[..self.d].iter().map(|x| x * x).sum()
    }

    /// Flat index of -ξ given the flat index of ξ.
    ///
    /// Because each axis enumerates -R..=R symmetrically, negation mirrors
    /// the flat index: index(-ξ) = len - 1 - index(ξ).
    #[inline]
    pub fn mirror(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    /// Iterates `(flat index, mode)` pairs in enumeration order.
    pub fn modes(&self) -> impl Iterator<Item = (usize, [i64; 3])> + '_ {
        (0..self.len()).map(move |i| (i, self.xi(i)))
    }
}
