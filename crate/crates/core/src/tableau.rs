//! Explicit Runge–Kutta Butcher tableaux.
//!
//! A tableau is the coefficient set `(a, b, c)` of an explicit Runge–Kutta
//! scheme: stage `i` evaluates the right-hand side at time `t + c[i]·h` on a
//! state advanced by `h·Σ_{j<i} a[i][j]·k_j`, and the step result combines
//! the stage slopes with weights `b`.  Only the strictly lower-triangular
//! part of `a` is stored (row `i` holds `i` entries), so explicitness is
//! guaranteed by construction.

use crate::error::{Error, Result};
use crate::real::Real;

/// Coefficients of an explicit Runge–Kutta scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau<T> {
    name: &'static str,
    order: usize,
    /// Strictly lower-triangular stage matrix; row `i` has `i` entries.
    a: Vec<Vec<T>>,
    /// Output weights, one per stage.
    b: Vec<T>,
    /// Stage abscissae, one per stage.
    c: Vec<T>,
}

impl<T: Real> ButcherTableau<T> {
    /// Builds a tableau and checks its internal consistency: row `i` of `a`
    /// must have exactly `i` entries, `b` and `c` must match the stage
    /// count, each `c[i]` must equal the row sum `Σ_j a[i][j]`, and the
    /// weights must satisfy `Σ b = 1` (first-order consistency).
    pub fn new(
        name: &'static str,
        order: usize,
        a: Vec<Vec<T>>,
        b: Vec<T>,
        c: Vec<T>,
    ) -> Result<Self> {
        let s = b.len();
        if s == 0 || a.len() != s || c.len() != s {
            return Err(Error::BadConfig(format!(
                "tableau {name}: inconsistent stage counts (a: {}, b: {}, c: {})",
                a.len(),
                s,
                c.len()
            )));
        }
        for (i, row) in a.iter().enumerate() {
            if row.len() != i {
                return Err(Error::BadConfig(format!(
                    "tableau {name}: stage {i} has {} coefficients, expected {i}",
                    row.len()
                )));
            }
        }
        let tol = T::scaled_tol(1e-14);
        for (i, row) in a.iter().enumerate() {
            let sum = row.iter().fold(T::zero(), |acc, &x| acc + x);
            if (sum - c[i]).abs() > tol {
                return Err(Error::BadConfig(format!(
                    "tableau {name}: row {i} sums to {:?}, abscissa is {:?}",
                    sum.to_f64(),
                    c[i].to_f64()
                )));
            }
        }
        let bsum = b.iter().fold(T::zero(), |acc, &x| acc + x);
        if (bsum - T::one()).abs() > tol {
            return Err(Error::BadConfig(format!(
                "tableau {name}: weights sum to {:?}, expected 1",
                bsum.to_f64()
            )));
        }
        Ok(Self { name, order, a, b, c })
    }

    /// Human-readable scheme name.
    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Classical order of accuracy of the scheme.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stages.
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Stage matrix row `i` (the `i` coefficients multiplying earlier slopes).
    pub fn a_row(&self, i: usize) -> &[T] {
        &self.a[i]
    }

    /// Output weights.
    pub fn b(&self) -> &[T] {
        &self.b
    }

    /// Stage abscissae.
    pub fn c(&self) -> &[T] {
        &self.c
    }

    /// The classical four-stage fourth-order scheme.
    pub fn rk4() -> Self {
        let h = T::of(0.5);
        let a = vec![
            vec![],
            vec![h],
            vec![T::zero(), h],
            vec![T::zero(), T::zero(), T::one()],
        ];
        let sixth = T::one() / T::of(6.0);
        let third = T::one() / T::of(3.0);
        let b = vec![sixth, third, third, sixth];
        let c = vec![T::zero(), h, h, T::one()];
        Self::new("rk4", 4, a, b, c).expect("rk4 tableau is consistent")
    }

    /// The six-stage fifth-order Dormand–Prince scheme (the propagating
    /// weights of DOPRI5(4), without the embedded error estimator).
    pub fn dopri5() -> Self {
        let f = |num: f64, den: f64| T::of(num) / T::of(den);
        let a = vec![
            vec![],
            vec![f(1.0, 5.0)],
            vec![f(3.0, 40.0), f(9.0, 40.0)],
            vec![f(44.0, 45.0), f(-56.0, 15.0), f(32.0, 9.0)],
            vec![
                f(19372.0, 6561.0),
                f(-25360.0, 2187.0),
                f(64448.0, 6561.0),
                f(-212.0, 729.0),
            ],
            vec![
                f(9017.0, 3168.0),
                f(-355.0, 33.0),
                f(46732.0, 5247.0),
                f(49.0, 176.0),
                f(-5103.0, 18656.0),
            ],
        ];
        let b = vec![
            f(35.0, 384.0),
            T::zero(),
            f(500.0, 1113.0),
            f(125.0, 192.0),
            f(-2187.0, 6784.0),
            f(11.0, 84.0),
        ];
        let c = vec![
            T::zero(),
            f(1.0, 5.0),
            f(3.0, 10.0),
            f(4.0, 5.0),
            f(8.0, 9.0),
            T::one(),
        ];
        Self::new("dopri5", 5, a, b, c).expect("dopri5 tableau is consistent")
    }

    /// Looks a scheme up by name (`"rk4"` or `"dopri5"`).
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "rk4" => Ok(Self::rk4()),
            "dopri5" => Ok(Self::dopri5()),
            other => Err(Error::BadConfig(format!(
                "unknown tableau {other:?}; available: rk4, dopri5"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Applies one step of the scheme to the scalar test equation
    /// y' = z·y with y(0) = 1, h = 1, returning the stability-function
    /// value S(z).
    fn stability(tab: &ButcherTableau<f64>, z: f64) -> f64 {
        let s = tab.stages();
        let mut k = vec![0.0f64; s];
        for i in 0..s {
            let mut y = 1.0;
            for (j, &aij) in tab.a_row(i).iter().enumerate() {
                y += aij * k[j];
            }
            k[i] = z * y;
        }
        let mut y = 1.0;
        for i in 0..s {
            y += tab.b()[i] * k[i];
        }
        y
    }

    #[test]
    fn rk4_stability_polynomial() {
        // S(z) = 1 + z + z²/2 + z³/6 + z⁴/24 for the classical scheme.
        for z in [-1.0f64, -0.5, 0.3, 1.7] {
            let expect = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
            assert!((stability(&ButcherTableau::rk4(), z) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn dopri5_stability_polynomial() {
        // Six stages, order five: S(z) = Σ_{k≤5} z^k/k! + z⁶/600.
        for z in [-1.0f64, -0.5, 0.3, 1.7] {
            let mut expect = 0.0;
            let mut fact = 1.0;
            for k in 0..=5 {
                if k > 0 {
                    fact *= k as f64;
                }
                expect += z.powi(k) / fact;
            }
            expect += z.powi(6) / 600.0;
            let got = stability(&ButcherTableau::dopri5(), z);
            assert!((got - expect).abs() < 1e-13, "z={z}: {got} vs {expect}");
        }
    }

    #[test]
    fn tableau_metadata() {
        let rk4 = ButcherTableau::<f64>::rk4();
        assert_eq!(rk4.name(), "rk4");
        assert_eq!(rk4.order(), 4);
        assert_eq!(rk4.stages(), 4);
        let dp = ButcherTableau::<f64>::dopri5();
        assert_eq!(dp.order(), 5);
        assert_eq!(dp.stages(), 6);
        assert_eq!(
            ButcherTableau::<f64>::by_name("dopri5").unwrap(),
            ButcherTableau::dopri5()
        );
        assert!(ButcherTableau::<f64>::by_name("euler").is_err());
    }

    #[test]
    fn validation_rejects_inconsistent_coefficients() {
        // Row sum ≠ abscissa.
        let bad = ButcherTableau::new(
            "bad",
            2,
            vec![vec![], vec![0.3]],
            vec![0.5, 0.5],
            vec![0.0, 0.5],
        );
        assert!(matches!(bad, Err(Error::BadConfig(_))));
        // Weights not summing to one.
        let bad = ButcherTableau::new(
            "bad",
            2,
            vec![vec![], vec![0.5]],
            vec![0.5, 0.4],
            vec![0.0, 0.5],
        );
        assert!(matches!(bad, Err(Error::BadConfig(_))));
        // Wrong row length.
        let bad = ButcherTableau::new(
            "bad",
            2,
            vec![vec![0.0], vec![0.5]],
            vec![0.5, 0.5],
            vec![0.0, 0.5],
        );
        assert!(matches!(bad, Err(Error::BadConfig(_))));
    }
}
