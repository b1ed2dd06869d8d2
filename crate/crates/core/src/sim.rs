//! Cycle-accurate simulation of the switched model.
//!
//! Each stage is LTI, so it is propagated exactly through the matrix exponential of
//! the augmented system `[[A, B], [0, 0]]`. The only approximation is the location
//! of the switching instant, found by pre-sampling the cycle and refining the
//! bracketed crossing with safeguarded Newton steps.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Stage, SwitchedModel};

/// Exact propagator of one LTI stage over a fixed time step:
/// `x(dt) = Φ x(0) + Γ u`.
#[derive(Debug, Clone)]
pub struct Flow {
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
}

impl Flow {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> Self {
        let n = a.nrows();
        let m = b.ncols();
        if dt == 0.0 {
            return Flow { phi: DMatrix::identity(n, n), gamma: DMatrix::zeros(n, m) };
        }
        let mut aug = DMatrix::zeros(n + m, n + m);
        aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
        aug.view_mut((0, n), (n, m)).copy_from(&(b * dt));
        let e = aug.exp();
        Flow {
            phi: e.view((0, 0), (n, n)).into_owned(),
            gamma: e.view((0, n), (n, m)).into_owned(),
        }
    }

    pub fn for_stage(model: &SwitchedModel, stage: Stage, dt: f64) -> Self {
        let (a, b) = model.stage(stage);
        Flow::new(a, b, dt)
    }

    pub fn apply(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.phi * x + &self.gamma * u
    }
}

/// Propagates `x` through `stage` for `dt` seconds at reference `v_r`.
pub fn stage_advance(model: &SwitchedModel, stage: Stage, x: &DVector<f64>, v_r: f64, dt: f64) -> DVector<f64> {
    assert!(dt >= 0.0, "negative time step");
    Flow::for_stage(model, stage, dt).apply(x, &model.input(v_r))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Pre-samples per cycle used to bracket the switching instant.
    pub crossing_samples: usize,
    /// Interior trajectory samples recorded per stage (0 keeps only clock and switching instants).
    pub samples_per_stage: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { crossing_samples: 64, samples_per_stage: 0 }
    }
}

/// Outcome of a single clock period.
#[derive(Debug, Clone)]
pub struct CycleOutcome {
    /// State at the next clock edge.
    pub x_end: DVector<f64>,
    /// Switching instant within the cycle: `Some(0)` if the comparator is already
    /// tripped at the clock edge, `None` if it never trips.
    pub t_switch: Option<f64>,
    pub x_switch: Option<DVector<f64>>,
}

impl CycleOutcome {
    pub fn duty(&self, period: f64) -> f64 {
        match self.t_switch {
            Some(t) => t / period,
            None => 1.0,
        }
    }
}

/// Per-model cache of stage propagators for the fixed steps used every cycle.
#[derive(Debug, Clone)]
pub struct CycleStepper<'a> {
    model: &'a SwitchedModel,
    samples: usize,
    s1_sub: Flow,
    s1_full: Flow,
    s2_full: Flow,
}

impl<'a> CycleStepper<'a> {
    pub fn new(model: &'a SwitchedModel, crossing_samples: usize) -> Self {
        let samples = crossing_samples.max(1);
        let t = model.period;
        CycleStepper {
            model,
            samples,
            s1_sub: Flow::for_stage(model, Stage::S1, t / samples as f64),
            s1_full: Flow::for_stage(model, Stage::S1, t),
            s2_full: Flow::for_stage(model, Stage::S2, t),
        }
    }

    pub fn model(&self) -> &SwitchedModel {
        self.model
    }

    /// Comparator margin `y - h` at phase `tau` for state `x`.
    fn margin(&self, x: &DVector<f64>, v_r: f64, tau: f64) -> f64 {
        self.model.output(x, v_r) - self.model.ramp.at_phase(tau)
    }

    /// Earliest phase at which `y` meets the ramp during S1, starting from `x0` at the
    /// clock edge. Returns the phase together with the state there.
    pub fn switching_instant(&self, x0: &DVector<f64>, v_r: f64) -> Option<(f64, DVector<f64>)> {
        let model = self.model;
        let u = model.input(v_r);
        if self.margin(x0, v_r, 0.0) <= 0.0 {
            return Some((0.0, x0.clone()));
        }
        let dt = model.period / self.samples as f64;
        let mut xa = x0.clone();
        let mut ga = self.margin(&xa, v_r, 0.0);
        for k in 0..self.samples {
            let ta = k as f64 * dt;
            let tb = if k + 1 == self.samples { model.period } else { (k + 1) as f64 * dt };
            let xb = self.s1_sub.apply(&xa, &u);
            let gb = self.margin(&xb, v_r, tb);
            if gb <= 0.0 {
                return Some(self.refine(&xa, ga, gb, ta, tb, &u, v_r));
            }
            xa = xb;
            ga = gb;
        }
        None
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        &self,
        xa: &DVector<f64>,
        ga: f64,
        gb: f64,
        ta: f64,
        tb: f64,
        u: &DVector<f64>,
        v_r: f64,
    ) -> (f64, DVector<f64>) {
        let model = self.model;
        let tol = 1e-15 * model.period;
        let slope = model.ramp.slope();
        let (mut lo, mut hi) = (0.0, tb - ta);
        let mut tau = hi * ga / (ga - gb);
        for _ in 0..200 {
            let x = Flow::for_stage(model, Stage::S1, tau).apply(xa, u);
            let g = self.margin(&x, v_r, ta + tau);
            if g == 0.0 {
                return (ta + tau, x);
            }
            if g > 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            let xdot = &model.a1 * &x + &model.b1 * u;
            let dg = model.c_row.dot(&xdot.transpose()) - slope;
            let mut next = tau - g / dg;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let done = (next - tau).abs() <= tol || hi - lo <= tol;
            tau = next;
            if done {
                break;
            }
        }
        let x = Flow::for_stage(model, Stage::S1, tau).apply(xa, u);
        (ta + tau, x)
    }

    /// One clock period from `x0`: S1 until the switching instant, S2 until the clock edge.
    pub fn cycle(&self, x0: &DVector<f64>, v_r: f64) -> CycleOutcome {
        let model = self.model;
        let u = model.input(v_r);
        match self.switching_instant(x0, v_r) {
            None => CycleOutcome { x_end: self.s1_full.apply(x0, &u), t_switch: None, x_switch: None },
            Some((0.0, xs)) => CycleOutcome {
                x_end: self.s2_full.apply(x0, &u),
                t_switch: Some(0.0),
                x_switch: Some(xs),
            },
            Some((t, xs)) => {
                let x_end = Flow::for_stage(model, Stage::S2, model.period - t).apply(&xs, &u);
                CycleOutcome { x_end, t_switch: Some(t), x_switch: Some(xs) }
            }
        }
    }
}

/// Earliest crossing of `y` and the ramp in `[0, T]`, starting from `x_start` at a
/// clock edge. `None` means the comparator never trips (duty 1).
pub fn switching_instant(model: &SwitchedModel, x_start: &DVector<f64>, v_r: f64) -> Option<f64> {
    CycleStepper::new(model, SimOptions::default().crossing_samples)
        .switching_instant(x_start, v_r)
        .map(|(t, _)| t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: DVector<f64>,
    pub y: f64,
    pub h: f64,
    pub stage: Stage,
    pub cycle: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// States at the clock edges, `n_cycles + 1` entries.
    pub clock_states: Vec<DVector<f64>>,
    pub cycle_duties: Vec<f64>,
    /// No crossing: the whole cycle spent in S1.
    pub saturated_high: Vec<bool>,
    /// Crossing at the clock edge: the whole cycle spent in S2.
    pub saturated_low: Vec<bool>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.clock_states.last().expect("trajectory has at least one clock state")
    }

    pub fn n_cycles(&self) -> usize {
        self.cycle_duties.len()
    }
}

#[allow(clippy::too_many_arguments)]
fn push_stage_interior(
    out: &mut Vec<Sample>,
    model: &SwitchedModel,
    stage: Stage,
    x_start: &DVector<f64>,
    v_r: f64,
    t_cycle: f64,
    tau_start: f64,
    tau_end: f64,
    count: usize,
    cycle: usize,
) {
    let u = model.input(v_r);
    let len = tau_end - tau_start;
    for k in 1..=count {
        let dt = len * k as f64 / (count + 1) as f64;
        let x = Flow::for_stage(model, stage, dt).apply(x_start, &u);
        let tau = tau_start + dt;
        out.push(Sample {
            t: t_cycle + tau,
            y: model.output(&x, v_r),
            h: model.ramp.at_phase(tau),
            x,
            stage,
            cycle,
        });
    }
}

/// Simulates `n_cycles` clock periods from `x0`.
pub fn simulate_cycles(
    model: &SwitchedModel,
    x0: &DVector<f64>,
    v_r: f64,
    n_cycles: usize,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if x0.len() != model.n {
        return Err(Error::Dimension { expected: model.n, got: x0.len() });
    }
    let stepper = CycleStepper::new(model, opts.crossing_samples);
    let period = model.period;
    let mut traj = Trajectory {
        samples: Vec::new(),
        clock_states: vec![x0.clone()],
        cycle_duties: Vec::with_capacity(n_cycles),
        saturated_high: Vec::with_capacity(n_cycles),
        saturated_low: Vec::with_capacity(n_cycles),
    };
    let mut x = x0.clone();
    let mut last_stage = Stage::S1;
    for k in 0..n_cycles {
        let t0 = k as f64 * period;
        let out = stepper.cycle(&x, v_r);
        if !out.x_end.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let first = if out.t_switch == Some(0.0) { Stage::S2 } else { Stage::S1 };
        traj.samples.push(Sample { t: t0, x: x.clone(), y: model.output(&x, v_r), h: 0.0, stage: first, cycle: k });
        match (out.t_switch, &out.x_switch) {
            (Some(ts), Some(xs)) if ts > 0.0 => {
                push_stage_interior(&mut traj.samples, model, Stage::S1, &x, v_r, t0, 0.0, ts, opts.samples_per_stage, k);
                traj.samples.push(Sample {
                    t: t0 + ts,
                    x: xs.clone(),
                    y: model.output(xs, v_r),
                    h: model.ramp.at_phase(ts),
                    stage: Stage::S2,
                    cycle: k,
                });
                push_stage_interior(&mut traj.samples, model, Stage::S2, xs, v_r, t0, ts, period, opts.samples_per_stage, k);
                last_stage = Stage::S2;
            }
            (Some(_), _) => {
                push_stage_interior(&mut traj.samples, model, Stage::S2, &x, v_r, t0, 0.0, period, opts.samples_per_stage, k);
                last_stage = Stage::S2;
            }
            (None, _) => {
                push_stage_interior(&mut traj.samples, model, Stage::S1, &x, v_r, t0, 0.0, period, opts.samples_per_stage, k);
                last_stage = Stage::S1;
            }
        }
        traj.cycle_duties.push(out.duty(period));
        traj.saturated_high.push(out.t_switch.is_none());
        traj.saturated_low.push(out.t_switch == Some(0.0));
        x = out.x_end;
        traj.clock_states.push(x.clone());
    }
    if n_cycles > 0 {
        // left limit at the final clock edge, ramp at its peak
        traj.samples.push(Sample {
            t: n_cycles as f64 * period,
            y: model.output(&x, v_r),
            h: model.ramp.v_h,
            x,
            stage: last_stage,
            cycle: n_cycles - 1,
        });
    }
    Ok(traj)
}

/// True iff the last `window` cycles all saturate at `D = 1` and the state moves
/// monotonically toward the DC solution `(v_s/r, 0)`.
pub fn detect_dc_saturation(model: &SwitchedModel, traj: &Trajectory, window: usize) -> bool {
    let n = traj.n_cycles();
    if window == 0 || window > n || model.params.r == 0.0 {
        return false;
    }
    if !traj.saturated_high[n - window..].iter().all(|&s| s) {
        return false;
    }
    let target = model.params.v_s / model.params.r;
    let scale = model.state_scale();
    let dist = |x: &DVector<f64>| (((x[0] - target) / scale[0]).powi(2) + (x[1] / scale[1]).powi(2)).sqrt();
    let d: Vec<f64> = traj.clock_states[n - window..].iter().map(dist).collect();
    d.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15)
}

/// CSV number format: scientific notation, 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a trajectory as CSV: `t, <state labels>, y, h, stage, cycle_index, duty`.
pub fn write_trajectory_csv<W: Write>(model: &SwitchedModel, traj: &Trajectory, mut w: W) -> std::io::Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(model.state_labels.iter().cloned());
    header.extend(["y", "h", "stage", "cycle_index", "duty"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for s in &traj.samples {
        let mut row = vec![fmt_num(s.t)];
        row.extend(s.x.iter().map(|&v| fmt_num(v)));
        row.push(fmt_num(s.y));
        row.push(fmt_num(s.h));
        row.push(s.stage.index().to_string());
        row.push(s.cycle.to_string());
        row.push(fmt_num(traj.cycle_duties[s.cycle]));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
