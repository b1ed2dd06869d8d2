//! Type-III compensator `K_c (1 + s/z1)(1 + s/z2) / (s (1 + s/p1)(1 + s/p2))`.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::ControlScheme;

/// Single-input single-output state-space realization `ẋ = A x + B e`, `out = C x + D e`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceRealization {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
}

impl StateSpaceRealization {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C (sI - A)^{-1} B + D`.
    pub fn transfer(&self, s: Complex64) -> Result<Complex64> {
        let n = self.order();
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - Complex64::new(self.a[(i, j)], 0.0)
        });
        let rhs = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(self.b[i], 0.0));
        let sol = m.lu().solve(&rhs).ok_or(Error::SingularResolvent(s))?;
        let mut out = Complex64::new(self.d, 0.0);
        for i in 0..n {
            out += sol[i] * self.c[i];
        }
        Ok(out)
    }
}

/// Cascade realization: integrator `K_c/s` followed by the two lead-lag sections
/// `(1 + s/z)/(1 + s/p)`. Every state carries volts, which keeps the composed
/// converter state well scaled.
///
/// States: `a` (integrator output), `b` (first pole state), `c` (second pole state).
pub fn realize_type3(k_c: f64, z1: f64, z2: f64, p1: f64, p2: f64) -> StateSpaceRealization {
    let g1 = p1 / z1;
    let g2 = p2 / z2;
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[
            0.0, 0.0, 0.0, //
            p1, -p1, 0.0, //
            p2 * g1, p2 * (1.0 - g1), -p2,
        ],
    );
    let b = DVector::from_vec(vec![k_c, 0.0, 0.0]);
    let c = RowDVector::from_vec(vec![g2 * g1, g2 * (1.0 - g1), 1.0 - g2]);
    StateSpaceRealization { a, b, c, d: 0.0 }
}

/// Realization for a `VmcType3` scheme; `None` for the other schemes.
pub fn realize_scheme(scheme: &ControlScheme) -> Option<StateSpaceRealization> {
    match *scheme {
        ControlScheme::VmcType3 { k_c, z1, z2, p1, p2 } => Some(realize_type3(k_c, z1, z2, p1, p2)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // direct evaluation of the rational transfer function
    fn g_c(s: Complex64, k_c: f64, z1: f64, z2: f64, p1: f64, p2: f64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        k_c * (one + s / z1) * (one + s / z2) / (s * (one + s / p1) * (one + s / p2))
    }

    const EX2: (f64, f64, f64, f64, f64) = (35.59, 556.0, 549.0, 25510.0, 19495.0);

    #[test]
    fn matches_rational_form_at_1krad() {
        let (k, z1, z2, p1, p2) = EX2;
        let ss = realize_type3(k, z1, z2, p1, p2);
        let s = Complex64::new(0.0, 1000.0);
        let got = ss.transfer(s).unwrap();
        let want = g_c(s, k, z1, z2, p1, p2);
        assert!((got - want).norm() / want.norm() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn matches_on_log_grid() {
        let (k, z1, z2, p1, p2) = EX2;
        let ss = realize_type3(k, z1, z2, p1, p2);
        let (lo, hi) = ((z1 / 100.0f64).ln(), (100.0 * p2).ln());
        for i in 0..20 {
            let w = (lo + (hi - lo) * i as f64 / 19.0).exp();
            let s = Complex64::new(0.0, w);
            let got = ss.transfer(s).unwrap();
            let want = g_c(s, k, z1, z2, p1, p2);
            assert!((got - want).norm() / want.norm() <= 1e-9, "w = {w}");
        }
    }

    #[test]
    fn integrator_dominates_at_low_frequency() {
        let (k, z1, z2, p1, p2) = EX2;
        let ss = realize_type3(k, z1, z2, p1, p2);
        let g1 = ss.transfer(Complex64::new(0.0, 1e-2)).unwrap().norm();
        let g2 = ss.transfer(Complex64::new(0.0, 1e-4)).unwrap().norm();
        assert!(g2 > 90.0 * g1);
        assert!(g2 > 1e5);
    }

    #[test]
    fn gain_scales_linearly() {
        let (k, z1, z2, p1, p2) = EX2;
        let a = realize_type3(k, z1, z2, p1, p2);
        let b = realize_type3(2.0 * k, z1, z2, p1, p2);
        for w in [10.0, 1e3, 1e5] {
            let s = Complex64::new(0.3 * w, w);
            let ra = a.transfer(s).unwrap();
            let rb = b.transfer(s).unwrap();
            assert!((rb - 2.0 * ra).norm() <= 1e-12 * rb.norm());
        }
    }
}
