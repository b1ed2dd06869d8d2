//! Closed-form state-space-averaged analysis: steady states, coexisting
//! operating points, characteristic coefficients, poles, and the saddle-node
//! and Hopf critical conditions.
//!
//! The averaged model ignores capacitor ESR. With `u = 1 - D` and `η = r/R`,
//! the steady state is `I_L = v_s / (R (η + u²))`, `V_C = v_s u / (η + u²)`.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{ControlScheme, ConverterParams};

/// Upper end of the duty grid used by root searches; `D = 1` is the DC solution.
pub const DUTY_GRID_MAX: f64 = 0.999;
/// Number of grid points used to bracket duty solutions.
pub const DUTY_GRID_POINTS: usize = 2000;

fn check_duty(p: &ConverterParams, d: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&d) || !d.is_finite() {
        return Err(Error::DutyOutOfRange(d));
    }
    if d == 1.0 && p.r == 0.0 {
        return Err(Error::DegenerateSteadyState);
    }
    Ok(())
}

fn require_pvmc(p: &ConverterParams) -> Result<f64> {
    match (p.scheme, p.kappa()) {
        (ControlScheme::Pvmc { .. }, Some(kappa)) => Ok(kappa),
        _ => Err(Error::WrongScheme { expected: "pvmc", got: p.scheme.name() }),
    }
}

/// Averaged steady state `(I_L, V_C)` at duty `d`.
pub fn averaged_steady_state(p: &ConverterParams, d: f64) -> Result<(f64, f64)> {
    check_duty(p, d)?;
    let u = 1.0 - d;
    let den = p.eta() + u * u;
    Ok((p.v_s / (p.r_load * den), p.v_s * u / den))
}

/// Peak inductor current `I_L + ΔI_L/2` with ripple `ΔI_L = (v_s - r I_L) D T / L`.
pub fn peak_current(p: &ConverterParams, d: f64) -> Result<f64> {
    let (i_l, _) = averaged_steady_state(p, d)?;
    let ripple = (p.v_s - p.r * i_l) * d * p.period() / p.l;
    Ok(i_l + 0.5 * ripple)
}

/// Reference voltage that makes `d` a steady-state duty ratio.
///
/// * PVMC: `v_r = D/κ + V_C(D)`
/// * current mode, closed voltage loop: `v_r = I_peak(D)/k_p + V_C(D)`
/// * type-III (integrator forces zero average error): `v_r = V_C(D)`
pub fn vr_of_duty(p: &ConverterParams, d: f64) -> Result<f64> {
    let (_, v_c) = averaged_steady_state(p, d)?;
    match p.scheme {
        ControlScheme::Pvmc { .. } => {
            let kappa = require_pvmc(p)?;
            Ok(d / kappa + v_c)
        }
        ControlScheme::CmcClosedLoop { k_p } => Ok(peak_current(p, d)? / k_p + v_c),
        ControlScheme::VmcType3 { .. } => Ok(v_c),
        ControlScheme::CmcOpenLoop => Err(Error::WrongScheme {
            expected: "pvmc, vmc_type3 or cmc_closed",
            got: "cmc_open",
        }),
    }
}

/// The reference quantity a scheme regulates: `v_r` for voltage loops, the
/// peak-current command for open-loop current mode.
fn reference_of_duty(p: &ConverterParams, d: f64) -> Result<f64> {
    match p.scheme {
        ControlScheme::CmcOpenLoop => peak_current(p, d),
        _ => vr_of_duty(p, d),
    }
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 || mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section search for the maximizer of `f` on `[lo, hi]`.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// All duty ratios in `[0, 0.999]` whose averaged steady state regulates to `v_r`,
/// sorted ascending. For open-loop current mode `v_r` is read as the peak-current
/// command.
///
/// Roots are bracketed on a 2000-point grid; discrete extrema of the grid are
/// refined by golden section so a pair of roots sharing one grid cell near a fold
/// is not missed.
pub fn duty_solutions(p: &ConverterParams, v_r: f64) -> Result<Vec<f64>> {
    reference_of_duty(p, 0.0)?;
    let f = |d: f64| reference_of_duty(p, d).map(|r| r - v_r).unwrap_or(f64::NAN);
    let n = DUTY_GRID_POINTS;
    let grid: Vec<f64> = (0..n).map(|k| DUTY_GRID_MAX * k as f64 / (n - 1) as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&d| f(d)).collect();

    let mut roots = Vec::new();
    for k in 0..n - 1 {
        if vals[k] == 0.0 {
            roots.push(grid[k]);
        } else if vals[k] * vals[k + 1] < 0.0 {
            roots.push(bisect(&f, grid[k], grid[k + 1]));
        }
    }
    if vals[n - 1] == 0.0 {
        roots.push(grid[n - 1]);
    }
    for k in 1..n - 1 {
        let (a, b, c) = (vals[k - 1], vals[k], vals[k + 1]);
        let is_max = b > a && b >= c;
        let is_min = b < a && b <= c;
        if !(is_max || is_min) || a * b <= 0.0 || b * c <= 0.0 {
            continue;
        }
        let sign = if is_max { 1.0 } else { -1.0 };
        let ext = golden_max(|d| sign * f(d), grid[k - 1], grid[k + 1], 1e-14);
        let f_ext = f(ext);
        if f_ext * b < 0.0 {
            roots.push(bisect(&f, grid[k - 1], ext));
            roots.push(bisect(&f, ext, grid[k + 1]));
        } else if f_ext == 0.0 {
            roots.push(ext);
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    Ok(roots)
}

/// Closed-loop characteristic coefficients `(c_1, c_0)` of `s² + c_1 s + c_0` for PVMC.
pub fn characteristic_coeffs(p: &ConverterParams, d: f64) -> Result<(f64, f64)> {
    let kappa = require_pvmc(p)?;
    let (i_l, _) = averaged_steady_state(p, d)?;
    let u2 = (1.0 - d).powi(2);
    let eta = p.eta();
    let c1 = p.r / p.l + 1.0 / (p.r_load * p.c) - kappa * i_l / p.c;
    let c0 = (eta + u2 + kappa * p.r_load * i_l * (u2 - eta)) / (p.l * p.c);
    Ok((c1, c0))
}

/// Routh–Hurwitz classification of a second-order characteristic polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoleClass {
    Stable,
    OneUnstable,
    TwoUnstable,
    /// `c_1 = 0` or `c_0 = 0`: a bifurcation point.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Poles {
    pub roots: [Complex64; 2],
    pub class: PoleClass,
}

pub fn classify_coeffs(c1: f64, c0: f64) -> PoleClass {
    if c0 < 0.0 {
        PoleClass::OneUnstable
    } else if c0 > 0.0 && c1 < 0.0 {
        PoleClass::TwoUnstable
    } else if c0 > 0.0 && c1 > 0.0 {
        PoleClass::Stable
    } else {
        PoleClass::Marginal
    }
}

/// Roots of `s² + c_1 s + c_0`, ordered by descending real part.
pub fn quadratic_roots(c1: f64, c0: f64) -> [Complex64; 2] {
    let disc = c1 * c1 - 4.0 * c0;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // cancellation-free pair
        let q = -0.5 * (c1 + c1.signum() * sq);
        let (a, b) = if q != 0.0 { (q, c0 / q) } else { (0.5 * sq, -0.5 * sq) };
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
    } else {
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(-0.5 * c1, im), Complex64::new(-0.5 * c1, -im)]
    }
}

pub fn averaged_poles(p: &ConverterParams, d: f64) -> Result<Poles> {
    let (c1, c0) = characteristic_coeffs(p, d)?;
    Ok(Poles { roots: quadratic_roots(c1, c0), class: classify_coeffs(c1, c0) })
}

/// Large-gain saddle-node duty `1 - √η`, the maximizer of `V_C(D)`.
pub fn snb_duty_large_gain(p: &ConverterParams) -> Result<f64> {
    if p.r == 0.0 {
        return Err(Error::NoSaddleNode("parasitic resistance r is zero"));
    }
    Ok(1.0 - p.eta().sqrt())
}

/// Saddle-node duty `D_S`.
///
/// PVMC: the exact root of `c_0(D) = 0`. Writing `w = (1 - D)²`, `c_0 = 0` is
/// `w² + (2η + κ v_s) w + η² - κ v_s η = 0`, whose positive root is
/// `w = √((2η + κ v_s/4) κ v_s) - η - κ v_s/2`.
/// Type-III: `1 - √η`. Closed-loop current mode: maximizer of `v_r(D)`.
pub fn snb_duty(p: &ConverterParams) -> Result<f64> {
    if p.r == 0.0 {
        return Err(Error::NoSaddleNode("parasitic resistance r is zero"));
    }
    let eta = p.eta();
    match p.scheme {
        ControlScheme::Pvmc { .. } => {
            let kv = require_pvmc(p)? * p.v_s;
            let w = ((2.0 * eta + 0.25 * kv) * kv).sqrt() - eta - 0.5 * kv;
            Ok(1.0 - w.sqrt())
        }
        ControlScheme::VmcType3 { .. } => snb_duty_large_gain(p),
        ControlScheme::CmcClosedLoop { .. } => vr_maximizer(p),
        ControlScheme::CmcOpenLoop => Err(Error::NoSaddleNode("peak current is monotone in D with the voltage loop open")),
    }
}

fn vr_maximizer(p: &ConverterParams) -> Result<f64> {
    let n = DUTY_GRID_POINTS;
    let mut best = (0usize, f64::NEG_INFINITY);
    for k in 0..n {
        let d = DUTY_GRID_MAX * k as f64 / (n - 1) as f64;
        let v = vr_of_duty(p, d)?;
        if v > best.1 {
            best = (k, v);
        }
    }
    let h = DUTY_GRID_MAX / (n - 1) as f64;
    if best.0 == n - 1 {
        return Err(Error::NoSaddleNode("v_r(D) has no interior maximum"));
    }
    let lo = (best.0 as f64 - 1.0).max(0.0) * h;
    let hi = (best.0 as f64 + 1.0) * h;
    Ok(golden_max(|d| vr_of_duty(p, d).unwrap_or(f64::NEG_INFINITY), lo, hi, 1e-9))
}

/// Critical reference `v_r*` at the saddle node: `v_r(D_S)` for PVMC and
/// closed-loop current mode, `v_s/(2√η)` for type-III.
pub fn snb_reference(p: &ConverterParams) -> Result<f64> {
    let d_s = snb_duty(p)?;
    vr_of_duty(p, d_s)
}

/// Small-gain PVMC estimate `v_s/(2√η) + (1 - √η)/κ`, i.e. `v_r(1 - √η)`.
pub fn snb_reference_small_gain(p: &ConverterParams) -> Result<f64> {
    let kappa = require_pvmc(p)?;
    if p.r == 0.0 {
        return Err(Error::NoSaddleNode("parasitic resistance r is zero"));
    }
    let se = p.eta().sqrt();
    Ok(p.v_s / (2.0 * se) + (1.0 - se) / kappa)
}

/// Large-gain estimate `v_s/(2√η)` shared by all voltage-loop schemes.
pub fn snb_reference_large_gain(p: &ConverterParams) -> Result<f64> {
    if p.r == 0.0 {
        return Err(Error::NoSaddleNode("parasitic resistance r is zero"));
    }
    Ok(p.v_s / (2.0 * p.eta().sqrt()))
}

/// Hopf duty `D_H = 1 - √(κ v_s/(rRC/L + 1) - η)`, the root of `c_1(D) = 0`.
/// `None` when the radicand is outside `(0, 1]`: no crossing in `[0, 1)`.
pub fn hopf_duty(p: &ConverterParams) -> Result<Option<f64>> {
    let kappa = require_pvmc(p)?;
    let radicand = kappa * p.v_s / (p.r * p.r_load * p.c / p.l + 1.0) - p.eta();
    if radicand > 0.0 && radicand <= 1.0 {
        Ok(Some(1.0 - radicand.sqrt()))
    } else {
        Ok(None)
    }
}

/// Gain above which `D_H < 0`: `(1 + η)(rRC/L + 1)/v_s`.
pub fn hopf_absent_threshold(p: &ConverterParams) -> f64 {
    (1.0 + p.eta()) * (p.r * p.r_load * p.c / p.l + 1.0) / p.v_s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfOrdering {
    /// `D_H` exists and `D_H < D_S`.
    pub precedes: bool,
    /// Sufficient gain condition `κ > 2η(rRC/L + 1)/v_s`.
    pub gain_condition: bool,
    pub gain_threshold: f64,
}

pub fn hopf_precedes_snb(p: &ConverterParams) -> Result<HopfOrdering> {
    let kappa = require_pvmc(p)?;
    let gain_threshold = 2.0 * p.eta() * (p.r * p.r_load * p.c / p.l + 1.0) / p.v_s;
    let precedes = match (hopf_duty(p)?, snb_duty(p)) {
        (Some(d_h), Ok(d_s)) => d_h < d_s,
        _ => false,
    };
    Ok(HopfOrdering { precedes, gain_condition: kappa > gain_threshold, gain_threshold })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalMode {
    /// `2L/(RT)`
    pub k: f64,
    /// `D (1 - D)²`
    pub k_crit: f64,
    /// `(2L/(rT)) (1 - D)²`, infinite when `r = 0`.
    pub k_star: f64,
    /// `K* > K_crit`, equivalently `2L/(rT) > D`.
    pub snb_excluded: bool,
}

pub fn critical_mode_check(p: &ConverterParams, d: f64) -> Result<CriticalMode> {
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::DutyOutOfRange(d));
    }
    let t = p.period();
    let u2 = (1.0 - d).powi(2);
    let k = 2.0 * p.l / (p.r_load * t);
    let k_crit = d * u2;
    let k_star = if p.r == 0.0 { f64::INFINITY } else { 2.0 * p.l / (p.r * t) * u2 };
    Ok(CriticalMode { k, k_crit, k_star, snb_excluded: k_star > k_crit })
}

fn averaged_matrices(p: &ConverterParams, d: f64) -> (Matrix2<f64>, Matrix2<f64>) {
    let (l, c, r_load, r) = (p.l, p.c, p.r_load, p.r);
    let u = 1.0 - d;
    let a = Matrix2::new(-r / l, -u / l, u / c, -1.0 / (r_load * c));
    let a1_minus_a2 = Matrix2::new(0.0, 1.0 / l, -1.0 / c, 0.0);
    (a, a1_minus_a2)
}

/// Control-to-output transfer function `G_vd(s) = E (sI - A)^{-1} (A1 - A2) X` of the
/// averaged power stage (open loop, ESR neglected).
pub fn control_to_output_tf(p: &ConverterParams, d: f64, s: Complex64) -> Result<Complex64> {
    require_pvmc(p)?;
    let (i_l, v_c) = averaged_steady_state(p, d)?;
    let (a, a12) = averaged_matrices(p, d);
    let b = a12 * Vector2::new(i_l, v_c);
    let m = Matrix2::<Complex64>::from_fn(|i, j| {
        let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
        diag - Complex64::new(a[(i, j)], 0.0)
    });
    let rhs = Vector2::new(Complex64::new(b[0], 0.0), Complex64::new(b[1], 0.0));
    let sol = m.lu().solve(&rhs).ok_or(Error::SingularResolvent(s))?;
    // E = [0 1]
    Ok(sol[1])
}

/// `1 + κ G_vd(s)`: vanishes exactly at the closed-loop averaged poles.
pub fn closed_loop_return_difference(p: &ConverterParams, d: f64, s: Complex64) -> Result<Complex64> {
    let kappa = require_pvmc(p)?;
    Ok(Complex64::new(1.0, 0.0) + kappa * control_to_output_tf(p, d, s)?)
}

/// The saturated `D = 1` solution `(v_s/r, 0)`.
pub fn dc_solution(p: &ConverterParams) -> Result<(f64, f64)> {
    if p.r == 0.0 {
        return Err(Error::NoDcSolution);
    }
    Ok((p.v_s / p.r, 0.0))
}

/// Summary of the averaged critical conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalReport {
    pub d_s: f64,
    pub v_r_star: f64,
    pub d_h: Option<f64>,
    pub v_r_hopf: Option<f64>,
    pub hopf_precedes_snb: bool,
    pub k: f64,
    pub k_crit: f64,
    pub k_star: f64,
}

/// Critical conditions for a scheme with a saddle node (`r > 0`). Hopf entries are
/// filled for PVMC only.
pub fn critical_report(p: &ConverterParams) -> Result<CriticalReport> {
    let d_s = snb_duty(p)?;
    let v_r_star = snb_reference(p)?;
    let (d_h, hopf_precedes) = if let ControlScheme::Pvmc { .. } = p.scheme {
        (hopf_duty(p)?, hopf_precedes_snb(p)?.precedes)
    } else {
        (None, false)
    };
    let v_r_hopf = d_h.map(|d| vr_of_duty(p, d)).transpose()?;
    let cm = critical_mode_check(p, d_s)?;
    Ok(CriticalReport {
        d_s,
        v_r_star,
        d_h,
        v_r_hopf,
        hopf_precedes_snb: hopf_precedes,
        k: cm.k,
        k_crit: cm.k_crit,
        k_star: cm.k_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex1() -> ConverterParams {
        ConverterParams::new(3.0, 1e-6, 100e-6, 2.0, 0.1, 0.0, 1.0, 600e3, ControlScheme::Pvmc { k_p: 2.0 })
            .unwrap()
    }

    fn ex2() -> ConverterParams {
        ConverterParams::new(
            10.0,
            46.6e-6,
            3e-3,
            23.0,
            0.6,
            0.018,
            2.0,
            300e3,
            ControlScheme::VmcType3 { k_c: 35.59, z1: 556.0, z2: 549.0, p1: 25510.0, p2: 19495.0 },
        )
        .unwrap()
    }

    fn ex3() -> ConverterParams {
        ConverterParams { v_h: 0.0, ..ex1() }.with_scheme(ControlScheme::CmcClosedLoop { k_p: 2.0 })
    }

    // bisection on an arbitrary scalar function, independent of the module's helper
    fn oracle_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) * f(lo) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn steady_state_examples() {
        let p = ex1();
        let (_, v_c) = averaged_steady_state(&p, 0.78).unwrap();
        assert!((v_c - 0.66 / 0.0984).abs() < 1e-12);
        assert!((v_c - 6.70).abs() < 0.01);
        let (i_l, v_c) = averaged_steady_state(&p, 0.0).unwrap();
        assert!((v_c - 3.0 / 1.05).abs() < 1e-12);
        assert!((i_l - 3.0 / (2.0 * 1.05)).abs() < 1e-12);
        let (_, v_c) = averaged_steady_state(&p.with_r(0.0), 0.0).unwrap();
        assert_eq!(v_c, 3.0);
        assert!(matches!(averaged_steady_state(&p.with_r(0.0), 1.0), Err(Error::DegenerateSteadyState)));
        assert!(averaged_steady_state(&p, 1.2).is_err());
    }

    #[test]
    fn ex2_steady_state_matches_quadratic_oracle() {
        // 30.3 u² - 10 u + 30.3 η = 0, smaller-u root is the high-duty solution
        let p = ex2();
        let eta = p.eta();
        let disc = 100.0 - 4.0 * 30.3 * 30.3 * eta;
        let u_hi = (10.0 + disc.sqrt()) / (2.0 * 30.3);
        let u_lo = (10.0 - disc.sqrt()) / (2.0 * 30.3);
        let sols = duty_solutions(&p, 30.3).unwrap();
        assert_eq!(sols.len(), 2);
        assert!((sols[0] - (1.0 - u_hi)).abs() < 1e-9);
        assert!((sols[1] - (1.0 - u_lo)).abs() < 1e-9);
        assert!((sols[0] - 0.8015).abs() < 0.005);
        assert!((sols[1] - 0.8685).abs() < 0.005);
        let (_, v_c) = averaged_steady_state(&p, sols[0]).unwrap();
        assert!((v_c - 30.3).abs() < 1e-8);
    }

    #[test]
    fn vr_of_duty_examples() {
        let p = ex1();
        let d = 1.0 - 0.05f64.sqrt();
        assert!((vr_of_duty(&p, d).unwrap() - 7.096).abs() < 0.001);
        let q = ex3();
        let v = vr_of_duty(&q, 0.91).unwrap();
        // direct evaluation of the peak-current relation
        let i_l = 3.0 / (2.0 * (0.05 + 0.0081));
        let ripple = (3.0 - 0.1 * i_l) * 0.91 * (1.0 / 600e3) / 1e-6;
        let v_c = 3.0 * 0.09 / (0.05 + 0.0081);
        assert!((v - ((i_l + ripple / 2.0) / 2.0 + v_c)).abs() < 1e-12);
        assert!((i_l - 25.82).abs() < 0.01 && (ripple - 0.634).abs() < 0.001);
        assert!((v - 17.71).abs() < 0.02);
        assert!(vr_of_duty(&q.with_scheme(ControlScheme::CmcOpenLoop), 0.5).is_err());
        let p0 = p.with_r(0.0);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..999 {
            let v = vr_of_duty(&p0, k as f64 / 1000.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn coexisting_solutions_ex1() {
        let p = ex1();
        let s = duty_solutions(&p, 7.0).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s[0] - 0.74).abs() < 0.01, "{s:?}");
        assert!((s[1] - 0.81).abs() < 0.01, "{s:?}");
        assert!(duty_solutions(&p, 8.0).unwrap().is_empty());
    }

    #[test]
    fn duty_solutions_resolves_pair_inside_one_cell() {
        let p = ex1();
        let d_s = snb_duty(&p).unwrap();
        let d = d_s + 1e-5;
        let v = vr_of_duty(&p, d).unwrap();
        let s = duty_solutions(&p, v).unwrap();
        assert_eq!(s.len(), 2, "{s:?}");
        assert!(s.iter().any(|x| (x - d).abs() < 1e-6));
    }

    #[test]
    fn coefficients_vanish_at_critical_duties() {
        let p = ex1();
        let d_s = snb_duty(&p).unwrap();
        let d_h = hopf_duty(&p).unwrap().unwrap();
        assert!((d_s - 0.780).abs() < 1e-3);
        assert!((d_h - 0.5145).abs() < 1e-4);
        let (_, c0) = characteristic_coeffs(&p, d_s).unwrap();
        let (c1, c0h) = characteristic_coeffs(&p, d_h).unwrap();
        let scale0 = 1.0 / (p.l * p.c);
        let scale1 = p.r / p.l;
        assert!(c0.abs() <= 1e-9 * scale0);
        assert!(c1.abs() <= 1e-9 * scale1);
        assert!(c0h > 0.0);
        // cross-check against bisection on c_0(D)
        let root = oracle_root(|d| characteristic_coeffs(&p, d).unwrap().1, 0.5, 0.95);
        assert!((root - d_s).abs() < 1e-9);
    }

    #[test]
    fn no_snb_without_resistance() {
        let p = ex1().with_r(0.0);
        for k in 0..1000 {
            let (_, c0) = characteristic_coeffs(&p, k as f64 / 1000.0).unwrap();
            assert!(c0 > 0.0);
        }
        assert!(matches!(snb_duty(&p), Err(Error::NoSaddleNode(_))));
        assert!(matches!(dc_solution(&p), Err(Error::NoDcSolution)));
        assert!(!hopf_precedes_snb(&p).unwrap().precedes);
    }

    #[test]
    fn snb_duty_limits() {
        // large-gain limit
        let p = ConverterParams { v_h: 1e-6, ..ex1() };
        assert!((snb_duty(&p).unwrap() - (1.0 - 0.05f64.sqrt())).abs() < 1e-4);
        assert!((snb_duty(&ex2()).unwrap() - 0.8385).abs() < 1e-4);
        assert!((snb_reference(&ex2()).unwrap() - 30.95).abs() < 0.01);
    }

    #[test]
    fn snb_reference_ex1() {
        let p = ex1();
        assert!((snb_reference(&p).unwrap() - 7.10).abs() < 0.01);
        assert!((snb_reference_small_gain(&p).unwrap() - 7.096).abs() < 0.001);
    }

    #[test]
    fn cmc_closed_fold_is_vr_maximum() {
        let p = ex3();
        let d_s = snb_duty(&p).unwrap();
        assert!((d_s - 0.91).abs() < 0.01);
        let v = snb_reference(&p).unwrap();
        assert!((v - 17.71).abs() < 0.02);
        for dd in [-1e-3, 1e-3] {
            assert!(vr_of_duty(&p, d_s + dd).unwrap() < v);
        }
        assert!(d_s > 1.0 - p.eta().sqrt());
    }

    #[test]
    fn hopf_absent_for_large_gain() {
        let p = ex1();
        assert!((hopf_absent_threshold(&p) - 7.35).abs() < 1e-12);
        let q = p.with_scheme(ControlScheme::Pvmc { k_p: 8.0 });
        assert_eq!(hopf_duty(&q).unwrap(), None);
        assert!((vr_of_duty(&p, hopf_duty(&p).unwrap().unwrap()).unwrap() - 5.355).abs() < 0.005);
    }

    #[test]
    fn hopf_ordering() {
        let p = ex1();
        let o = hopf_precedes_snb(&p).unwrap();
        assert!(o.precedes && o.gain_condition);
        assert!((o.gain_threshold - 0.7).abs() < 1e-12);
        // half the threshold gain: the Hopf duty moves past the fold
        let q = p.with_scheme(ControlScheme::Pvmc { k_p: 0.35 });
        let o = hopf_precedes_snb(&q).unwrap();
        assert!(!o.gain_condition);
        let d_s = oracle_root(|d| characteristic_coeffs(&q, d).unwrap().1, 0.5, 0.999);
        let c1_at_ds = characteristic_coeffs(&q, d_s).unwrap().0;
        // c_1 still positive at the fold: no Hopf before the saddle node
        assert!(c1_at_ds > 0.0);
        assert!(!o.precedes);
    }

    #[test]
    fn pole_classes() {
        let p = ex1();
        assert_eq!(averaged_poles(&p, 0.3).unwrap().class, PoleClass::Stable);
        for r in averaged_poles(&p, 0.3).unwrap().roots {
            assert!(r.re < 0.0);
        }
        let poles = averaged_poles(&p, 0.79).unwrap();
        assert_eq!(poles.class, PoleClass::OneUnstable);
        assert!(poles.roots[0].im == 0.0 && poles.roots[0].re > 0.0 && poles.roots[1].re < 0.0);
        assert_eq!(averaged_poles(&p, 0.6).unwrap().class, PoleClass::TwoUnstable);
        let r = quadratic_roots(0.0, 4.0);
        assert_eq!(r[0], Complex64::new(0.0, 2.0));
        assert_eq!(r[1], Complex64::new(0.0, -2.0));
    }

    #[test]
    fn critical_mode_ex1() {
        let p = ex1();
        let cm = critical_mode_check(&p, 0.5).unwrap();
        assert!((cm.k - 0.6).abs() < 1e-12);
        assert!((cm.k_crit - 0.125).abs() < 1e-15);
        assert!((cm.k_star - 3.0).abs() < 1e-12);
        assert!(cm.snb_excluded);
        // 2L/(rT) = D exactly
        let d = 0.5;
        let q = ConverterParams { r: 2.0 * p.l / (d * p.period()), ..p };
        let cm = critical_mode_check(&q, d).unwrap();
        assert!((cm.k_star - cm.k_crit).abs() < 1e-15);
        let cm0 = critical_mode_check(&p.with_r(0.0), 0.5).unwrap();
        assert!(cm0.k_star.is_infinite() && cm0.snb_excluded);
    }

    #[test]
    fn transfer_function_against_direct_solve() {
        let p = ex1();
        let d = 0.3;
        let s = Complex64::new(0.0, 2.0 * std::f64::consts::PI * 1000.0);
        let g = control_to_output_tf(&p, d, s).unwrap();
        // Cramer's rule on (sI - A) z = (A1 - A2) X
        let (i_l, v_c) = averaged_steady_state(&p, d).unwrap();
        let u = 1.0 - d;
        let (a11, a12, a21, a22) = (-p.r / p.l, -u / p.l, u / p.c, -1.0 / (p.r_load * p.c));
        let (b1, b2) = (v_c / p.l, -i_l / p.c);
        let (m11, m12, m21, m22) = (s - a11, Complex64::new(-a12, 0.0), Complex64::new(-a21, 0.0), s - a22);
        let det = m11 * m22 - m12 * m21;
        let z2 = (m11 * b2 - m21 * b1) / det;
        assert!((g - z2).norm() <= 1e-12 * z2.norm());
    }

    #[test]
    fn return_difference_vanishes_at_poles() {
        let p = ex1();
        for d in [0.3, 0.6, 0.79] {
            for pole in averaged_poles(&p, d).unwrap().roots {
                let rd = closed_loop_return_difference(&p, d, pole).unwrap();
                assert!(rd.norm() < 1e-6, "d = {d}: {rd}");
            }
        }
        // the zero pole at the fold
        let d_s = snb_duty(&p).unwrap();
        let near = closed_loop_return_difference(&p, d_s - 1e-6, Complex64::new(0.0, 0.0)).unwrap();
        let far = closed_loop_return_difference(&p, 0.5, Complex64::new(0.0, 0.0)).unwrap();
        assert!(near.norm() < 1e-3 * far.norm());
    }

    #[test]
    fn dc_solutions() {
        let (i, v) = dc_solution(&ex1()).unwrap();
        assert!((i - 30.0).abs() < 1e-12 && v == 0.0);
        let (i, _) = dc_solution(&ex2()).unwrap();
        assert!((i - 16.7).abs() < 0.05);
    }

    #[test]
    fn report_ex1() {
        let r = critical_report(&ex1()).unwrap();
        assert!((r.d_s - 0.780).abs() < 1e-3);
        assert!((r.v_r_star - 7.10).abs() < 0.01);
        assert!((r.d_h.unwrap() - 0.514).abs() < 1e-3);
        assert!((r.v_r_hopf.unwrap() - 5.36).abs() < 0.01);
        assert!(r.hopf_precedes_snb);
    }
}
