//! Periodic orbits as fixed points of the stroboscopic (clock-to-clock) map and
//! their Floquet multipliers.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::averaged::averaged_steady_state;
use crate::error::{Error, Result};
use crate::model::{Stage, SwitchedModel};
use crate::params::ControlScheme;
use crate::sim::{fmt_num, CycleStepper, Flow};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitOptions {
    /// Newton tolerance on `‖P^k(x) - x‖` in normalized state units.
    pub newton_tol: f64,
    pub max_iter: usize,
    /// Maximum step halvings per Newton iteration.
    pub max_halvings: usize,
    pub crossing_samples: usize,
    /// Switching instants closer than `grazing · T` to a clock edge are not differentiated through.
    pub grazing: f64,
    /// Relative finite-difference step; the absolute step is `max(fd_rel, fd_rel·‖x‖)`.
    pub fd_rel: f64,
    /// Reject Newton steps that saturate a cycle the seed did not saturate.
    pub preserve_pattern: bool,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions {
            newton_tol: 1e-10,
            max_iter: 50,
            max_halvings: 8,
            crossing_samples: 64,
            grazing: 1e-6,
            fd_rel: 1e-6,
            preserve_pattern: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable { count: usize },
    /// Every cycle saturated at `D = 1`.
    SaturatedDc,
    /// A switching instant grazes a clock edge; multipliers are not computed.
    Degenerate,
}

impl Stability {
    pub fn label(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable { .. } => "unstable",
            Stability::SaturatedDc => "saturated_dc",
            Stability::Degenerate => "degenerate",
        }
    }

    pub fn is_stable(&self) -> bool {
        matches!(self, Stability::Stable)
    }
}

/// Which bifurcation a multiplier set sits close to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProximityTag {
    /// Real multiplier near +1.
    SaddleNode,
    /// Real multiplier near -1.
    PeriodDoubling,
    /// Complex pair near the unit circle.
    Neimark,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub v_r: f64,
    pub period_mult: usize,
    /// State at the clock instant.
    pub x_star: DVector<f64>,
    /// Duty ratio of each of the `period_mult` cycles.
    pub duties: Vec<f64>,
    /// Switching phases in seconds (`None` for a saturated cycle).
    pub switch_times: Vec<Option<f64>>,
    /// Floquet multipliers sorted by descending magnitude; empty for degenerate orbits.
    pub multipliers: Vec<Complex64>,
    /// `‖P^k(x*) - x*‖` in normalized units.
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub classification: Stability,
    pub tag: Option<ProximityTag>,
    pub converged: bool,
    pub iterations: usize,
}

impl Orbit {
    pub fn duty(&self) -> f64 {
        self.duties[0]
    }

    pub fn spectral_radius(&self) -> f64 {
        self.multipliers.iter().map(|l| l.norm()).fold(0.0, f64::max)
    }
}

/// The `k`-fold stroboscopic map with cycle bookkeeping.
pub struct StroboscopicMap<'a> {
    stepper: CycleStepper<'a>,
    pub v_r: f64,
}

/// Result of iterating the map over `k` cycles.
#[derive(Debug, Clone)]
pub struct MapOutcome {
    pub x: DVector<f64>,
    pub switch_times: Vec<Option<f64>>,
}

impl<'a> StroboscopicMap<'a> {
    pub fn new(model: &'a SwitchedModel, v_r: f64, crossing_samples: usize) -> Self {
        StroboscopicMap { stepper: CycleStepper::new(model, crossing_samples), v_r }
    }

    pub fn model(&self) -> &SwitchedModel {
        self.stepper.model()
    }

    pub fn iterate(&self, x: &DVector<f64>, k: usize) -> MapOutcome {
        let mut x = x.clone();
        let mut switch_times = Vec::with_capacity(k);
        for _ in 0..k {
            let out = self.stepper.cycle(&x, self.v_r);
            switch_times.push(out.t_switch);
            x = out.x_end;
        }
        MapOutcome { x, switch_times }
    }

    /// Central finite-difference Jacobian of `P^k` at `x`.
    pub fn jacobian(&self, x: &DVector<f64>, k: usize, fd_rel: f64) -> DMatrix<f64> {
        let n = x.len();
        let h = fd_rel.max(fd_rel * x.norm());
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let col = (self.iterate(&xp, k).x - self.iterate(&xm, k).x) / (2.0 * h);
            jac.set_column(j, &col);
        }
        jac
    }
}

/// One clock period of the switched dynamics.
pub fn stroboscopic_map(model: &SwitchedModel, v_r: f64, x: &DVector<f64>) -> DVector<f64> {
    StroboscopicMap::new(model, v_r, 64).iterate(x, 1).x
}

fn scaled_residual(model: &SwitchedModel, scale: &DVector<f64>, fx: &DVector<f64>, x: &DVector<f64>) -> f64 {
    debug_assert_eq!(scale.len(), model.n);
    (fx - x).component_div(scale).norm()
}

fn is_grazing(times: &[Option<f64>], period: f64, grazing: f64) -> Option<(usize, f64)> {
    times.iter().enumerate().find_map(|(i, t)| match *t {
        Some(t) if t > 0.0 && (t < grazing * period || t > (1.0 - grazing) * period) => Some((i, t)),
        _ => None,
    })
}

fn sort_multipliers(mut eig: Vec<Complex64>) -> Vec<Complex64> {
    eig.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    eig
}

fn eigenvalues(jac: &DMatrix<f64>) -> Vec<Complex64> {
    sort_multipliers(jac.complex_eigenvalues().iter().copied().collect())
}

/// Floquet multipliers of a converged orbit: eigenvalues of the finite-difference
/// Jacobian of `P^k` at `x*`, sorted by descending magnitude.
pub fn floquet_multipliers(model: &SwitchedModel, orbit: &Orbit, opts: &OrbitOptions) -> Result<Vec<Complex64>> {
    let map = StroboscopicMap::new(model, orbit.v_r, opts.crossing_samples);
    let out = map.iterate(&orbit.x_star, orbit.period_mult);
    if let Some((cycle, t_switch)) = is_grazing(&out.switch_times, model.period, opts.grazing) {
        return Err(Error::Grazing { cycle, t_switch });
    }
    Ok(eigenvalues(&map.jacobian(&orbit.x_star, orbit.period_mult, opts.fd_rel)))
}

/// Stability and nearest-bifurcation tag of a multiplier set. Stable iff every
/// `|λ| < 1 - margin`; tags use the window `[1 - δ, 1 + δ]`.
pub fn classify_stability(multipliers: &[Complex64], margin: f64, delta: f64) -> (Stability, Option<ProximityTag>) {
    let unstable = multipliers.iter().filter(|l| l.norm() >= 1.0 - margin).count();
    let stability = if unstable == 0 { Stability::Stable } else { Stability::Unstable { count: unstable } };
    let mut tag: Option<(f64, ProximityTag)> = None;
    for l in multipliers {
        let real = l.im.abs() <= 1e-12 * l.norm().max(1.0);
        let candidate = if real {
            if (l.re - 1.0).abs() <= delta {
                Some(((l.re - 1.0).abs(), ProximityTag::SaddleNode))
            } else if (l.re + 1.0).abs() <= delta {
                Some(((l.re + 1.0).abs(), ProximityTag::PeriodDoubling))
            } else {
                None
            }
        } else if (l.norm() - 1.0).abs() <= delta {
            Some(((l.norm() - 1.0).abs(), ProximityTag::Neimark))
        } else {
            None
        };
        if let Some(c) = candidate {
            if tag.is_none_or(|t| c.0 < t.0) {
                tag = Some(c);
            }
        }
    }
    (stability, tag.map(|t| t.1))
}

/// Newton iteration on `F(x) = P^k(x) - x` with a central finite-difference
/// Jacobian and step halving. A non-converged solve returns the best iterate with
/// `converged = false`.
pub fn find_periodic_orbit(
    model: &SwitchedModel,
    v_r: f64,
    x_guess: &DVector<f64>,
    period_mult: usize,
    opts: &OrbitOptions,
) -> Result<Orbit> {
    if x_guess.len() != model.n {
        return Err(Error::Dimension { expected: model.n, got: x_guess.len() });
    }
    if !x_guess.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let k = period_mult.max(1);
    let map = StroboscopicMap::new(model, v_r, opts.crossing_samples);
    let scale = model.state_scale();
    let n = model.n;

    let mut x = x_guess.clone();
    let first = map.iterate(&x, k);
    let seed_saturated = first.switch_times.iter().filter(|t| t.is_none()).count();
    let mut fx = first.x;
    let mut res = scaled_residual(model, &scale, &fx, &x);
    let mut history = vec![res];
    let mut iterations = 0;
    while res > opts.newton_tol && iterations < opts.max_iter {
        iterations += 1;
        let jac = map.jacobian(&x, k, opts.fd_rel);
        let jf = jac - DMatrix::<f64>::identity(n, n);
        let Some(step) = jf.lu().solve(&(&x - &fx)) else { break };
        if !step.iter().all(|v| v.is_finite()) {
            break;
        }
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let xn = &x + &step * lambda;
            let trial = map.iterate(&xn, k);
            let saturated = trial.switch_times.iter().filter(|t| t.is_none()).count();
            let fxn = trial.x;
            let rn = scaled_residual(model, &scale, &fxn, &xn);
            let pattern_ok = !opts.preserve_pattern || saturated <= seed_saturated;
            if pattern_ok && rn.is_finite() && rn < res {
                accepted = Some((xn, fxn, rn));
                break;
            }
            lambda *= 0.5;
        }
        let Some((xn, fxn, rn)) = accepted else { break };
        x = xn;
        fx = fxn;
        res = rn;
        history.push(res);
    }
    let converged = res <= opts.newton_tol;
    let out = map.iterate(&x, k);
    let duties: Vec<f64> = out
        .switch_times
        .iter()
        .map(|t| t.map_or(1.0, |t| t / model.period))
        .collect();
    let mut orbit = Orbit {
        v_r,
        period_mult: k,
        x_star: x,
        duties,
        switch_times: out.switch_times.clone(),
        multipliers: Vec::new(),
        residual: res,
        residual_history: history,
        classification: Stability::Degenerate,
        tag: None,
        converged,
        iterations,
    };
    if converged {
        match floquet_multipliers(model, &orbit, opts) {
            Ok(m) => {
                let (mut stability, tag) = classify_stability(&m, 0.0, 0.02);
                if orbit.switch_times.iter().all(|t| t.is_none()) {
                    stability = Stability::SaturatedDc;
                }
                orbit.multipliers = m;
                orbit.classification = stability;
                orbit.tag = tag;
            }
            Err(Error::Grazing { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(orbit)
}

/// A T-periodic orbit of the switched model with a prescribed duty ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedDutyOrbit {
    pub duty: f64,
    /// Reference at which the comparator trips exactly at `D T`.
    pub v_r: f64,
    pub x_star: DVector<f64>,
    /// The prescribed switching instant is the first comparator crossing of the cycle.
    pub realizable: bool,
}

/// Solves for the T-periodic orbit whose switching instant is `D T`.
///
/// With the switching instant fixed, one cycle is affine in `(x, v_r)`:
/// periodicity gives `N` linear equations and the comparator condition
/// `y(DT) = h(DT)` one more, so `(x*, v_r)` follow from a single linear solve.
/// Sweeping `D` traces the exact switched-model counterpart of `v_r(D)`.
pub fn fixed_duty_orbit(model: &SwitchedModel, d: f64) -> Result<FixedDutyOrbit> {
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::DutyOutOfRange(d));
    }
    let n = model.n;
    let t = model.period;
    let v_s = model.params.v_s;
    let f1 = Flow::for_stage(model, Stage::S1, d * t);
    let f2 = Flow::for_stage(model, Stage::S2, (1.0 - d) * t);
    let phi = &f2.phi * &f1.phi;
    let m = &f2.phi * &f1.gamma + &f2.gamma;
    let c_g1 = &model.c_row * &f1.gamma;
    let c_phi1 = &model.c_row * &f1.phi;

    let mut lhs = DMatrix::zeros(n + 1, n + 1);
    let mut rhs = DVector::zeros(n + 1);
    lhs.view_mut((0, 0), (n, n)).copy_from(&(DMatrix::identity(n, n) - &phi));
    for i in 0..n {
        lhs[(i, n)] = -m[(i, 1)];
        rhs[i] = m[(i, 0)] * v_s;
        lhs[(n, i)] = c_phi1[i];
    }
    lhs[(n, n)] = c_g1[1] + model.d_row[1];
    rhs[n] = model.ramp.at_phase(d * t) - (c_g1[0] + model.d_row[0]) * v_s;
    let sol = lhs.lu().solve(&rhs).ok_or(Error::NonFinite)?;
    let x_star = sol.rows(0, n).into_owned();
    let v_r = sol[n];
    if !v_r.is_finite() || !x_star.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let realizable = match CycleStepper::new(model, 64).switching_instant(&x_star, v_r) {
        Some((ts, _)) => (ts - d * t).abs() <= 1e-9 * t,
        None => false,
    };
    Ok(FixedDutyOrbit { duty: d, v_r, x_star, realizable })
}

/// Exact switched-model fold: the maximizer of `v_r` along fixed-duty orbits,
/// searched within `[lo, hi]`.
pub fn switched_fold(model: &SwitchedModel, lo: f64, hi: f64) -> Result<FixedDutyOrbit> {
    let f = |d: f64| fixed_duty_orbit(model, d).map(|o| o.v_r).unwrap_or(f64::NEG_INFINITY);
    let d = crate::averaged::golden_max(f, lo, hi, 1e-10);
    fixed_duty_orbit(model, d)
}

/// Duty ratio of the fixed-duty orbit at reference `v_r`, refined by secant
/// iteration from `d_guess`.
pub fn fixed_duty_for_reference(model: &SwitchedModel, v_r: f64, d_guess: f64) -> Result<FixedDutyOrbit> {
    let clamp = |d: f64| d.clamp(1e-9, 1.0 - 1e-9);
    let mut d0 = clamp(d_guess);
    let mut d1 = clamp(d_guess + if d_guess > 0.5 { -1e-4 } else { 1e-4 });
    let mut o0 = fixed_duty_orbit(model, d0)?;
    let mut g0 = o0.v_r - v_r;
    for _ in 0..60 {
        let o1 = fixed_duty_orbit(model, d1)?;
        let g1 = o1.v_r - v_r;
        if g1.abs() <= 1e-12 * v_r.abs().max(1.0) || (d1 - d0).abs() < 1e-15 {
            return Ok(o1);
        }
        let d2 = clamp(d1 - g1 * (d1 - d0) / (g1 - g0));
        if !d2.is_finite() {
            break;
        }
        d0 = d1;
        g0 = g1;
        o0 = o1;
        d1 = d2;
    }
    Ok(o0)
}

/// Clock-instant state to seed a Newton solve from an averaged operating point at
/// duty `d`. In order of preference: the fixed-duty orbit whose reference is
/// exactly `v_r` (duty refined from `d`), the fixed-duty orbit at `d`, and a
/// heuristic with the inductor current at its valley, the capacitor at the
/// averaged voltage and type-III compensator states at the value that holds
/// `y = D V_h`.
pub fn averaged_seed(model: &SwitchedModel, d: f64, v_r: f64) -> Result<DVector<f64>> {
    if let Ok(fd) = fixed_duty_for_reference(model, v_r, d) {
        if fd.realizable && (fd.v_r - v_r).abs() <= 1e-8 * v_r.abs().max(1.0) && (fd.duty - d).abs() <= 0.05 {
            return Ok(fd.x_star);
        }
    }
    if let Ok(fd) = fixed_duty_orbit(model, d) {
        if fd.realizable {
            return Ok(fd.x_star);
        }
    }
    heuristic_seed(model, d, v_r)
}

fn heuristic_seed(model: &SwitchedModel, d: f64, v_r: f64) -> Result<DVector<f64>> {
    let p = &model.params;
    let (i_l, v_c) = averaged_steady_state(p, d)?;
    let ripple = (p.v_s - p.r * i_l) * d * p.period() / p.l;
    let mut x = DVector::zeros(model.n);
    x[0] = i_l - 0.5 * ripple;
    x[1] = v_c;
    if let ControlScheme::VmcType3 { .. } = p.scheme {
        let q = d * p.v_h - v_r;
        for i in 2..model.n {
            x[i] = q;
        }
    }
    Ok(x)
}

/// The saturated DC solution as an orbit of the map, when it is a fixed point at
/// this reference (no wind-up, comparator never trips).
pub fn dc_orbit(model: &SwitchedModel, v_r: f64, opts: &OrbitOptions) -> Option<Orbit> {
    let x_dc = model.dc_point()?;
    let map = StroboscopicMap::new(model, v_r, opts.crossing_samples);
    let out = map.iterate(&x_dc, 1);
    if out.switch_times[0].is_some() {
        return None;
    }
    let scale = model.state_scale();
    let res = scaled_residual(model, &scale, &out.x, &x_dc);
    if res > opts.newton_tol {
        return None;
    }
    let multipliers = eigenvalues(&map.jacobian(&x_dc, 1, opts.fd_rel));
    let (_, tag) = classify_stability(&multipliers, 0.0, 0.02);
    Some(Orbit {
        v_r,
        period_mult: 1,
        x_star: x_dc,
        duties: vec![1.0],
        switch_times: vec![None],
        multipliers,
        residual: res,
        residual_history: vec![res],
        classification: Stability::SaturatedDc,
        tag,
        converged: true,
        iterations: 0,
    })
}

/// Writes orbits as CSV: reference, period, classification, residual, clock-instant
/// state, `;`-joined duties, and multipliers as re/im pairs.
pub fn write_orbits_csv<W: Write>(model: &SwitchedModel, orbits: &[Orbit], mut w: W) -> std::io::Result<()> {
    let mut header: Vec<String> =
        ["v_r", "period_mult", "classification", "unstable_count", "residual"].map(String::from).to_vec();
    header.extend(model.state_labels.iter().map(|l| format!("x_{l}")));
    header.push("duties".into());
    for i in 1..=model.n {
        header.push(format!("lambda{i}_re"));
        header.push(format!("lambda{i}_im"));
    }
    writeln!(w, "{}", header.join(","))?;
    for o in orbits {
        let count = match o.classification {
            Stability::Unstable { count } => count,
            _ => 0,
        };
        let mut row = vec![
            fmt_num(o.v_r),
            o.period_mult.to_string(),
            o.classification.label().to_string(),
            count.to_string(),
            fmt_num(o.residual),
        ];
        row.extend(o.x_star.iter().map(|&v| fmt_num(v)));
        row.push(o.duties.iter().map(|&d| fmt_num(d)).collect::<Vec<_>>().join(";"));
        for i in 0..model.n {
            match o.multipliers.get(i) {
                Some(l) => {
                    row.push(fmt_num(l.re));
                    row.push(fmt_num(l.im));
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
