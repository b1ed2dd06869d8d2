//! The five subcommands. Each returns its human-readable summary and writes its
//! CSV files into the configured output directory.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use boostbif_core::averaged::{
    averaged_poles, averaged_steady_state, characteristic_coeffs, critical_mode_check, dc_solution, duty_solutions,
    hopf_absent_threshold, hopf_duty, hopf_precedes_snb, snb_duty, snb_reference_large_gain,
    snb_reference_small_gain, vr_of_duty, PoleClass,
};
use boostbif_core::orbit::{averaged_seed, dc_orbit, find_periodic_orbit, write_orbits_csv, Orbit};
use boostbif_core::scan::{export_diagram, locate_all, sweep, CriticalKind};
use boostbif_core::sim::{detect_dc_saturation, fmt_num, simulate_cycles, write_trajectory_csv, SimOptions};
use boostbif_core::{ControlScheme, Error as CoreError, SwitchedModel};
use nalgebra::DVector;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::sig4;

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub text: String,
    pub files: Vec<PathBuf>,
}

fn out_path(cfg: &RunConfig, suffix: &str) -> PathBuf {
    cfg.out_dir.join(format!("{}_{suffix}.csv", cfg.run_id))
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

enum Value {
    Num(f64),
    Flag(bool),
    Missing,
}

impl Value {
    fn csv(&self) -> String {
        match self {
            Value::Num(v) => fmt_num(*v),
            Value::Flag(b) => b.to_string(),
            Value::Missing => String::new(),
        }
    }
}

/// Averaged critical conditions: saddle node, Hopf, their ordering, the
/// critical-mode check and the saturated DC solution.
pub fn analyze(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let p = &cfg.params;
    let pvmc = matches!(p.scheme, ControlScheme::Pvmc { .. });
    let mut rows: Vec<(&str, Value)> = Vec::new();
    let mut t = String::new();
    writeln!(t, "scheme: {}", p.scheme.name()).ok();
    writeln!(t, "eta = r/R = {}", sig4(p.eta())).ok();
    rows.push(("eta", Value::Num(p.eta())));
    match p.kappa() {
        Some(k) => {
            writeln!(t, "kappa = k_p/V_h = {}", sig4(k)).ok();
            rows.push(("kappa", Value::Num(k)));
        }
        None => {
            writeln!(t, "kappa: not defined (no ramp or no proportional gain)").ok();
            rows.push(("kappa", Value::Missing));
        }
    }

    let snb = match snb_duty(p) {
        Ok(d_s) => Some((d_s, vr_of_duty(p, d_s)?)),
        Err(CoreError::NoSaddleNode(why)) => {
            writeln!(t, "saddle node: no SNB ({why})").ok();
            rows.push(("D_S", Value::Missing));
            rows.push(("v_r_star", Value::Missing));
            None
        }
        Err(e) => return Err(e.into()),
    };
    if let Some((d_s, v_star)) = snb {
        writeln!(t, "saddle node: D_S = {}, v_r* = {}", sig4(d_s), sig4(v_star)).ok();
        rows.push(("D_S", Value::Num(d_s)));
        rows.push(("v_r_star", Value::Num(v_star)));
    }
    if p.r > 0.0 && matches!(p.scheme, ControlScheme::Pvmc { .. } | ControlScheme::VmcType3 { .. }) {
        let large = snb_reference_large_gain(p)?;
        writeln!(t, "  large-gain estimate v_s/(2 sqrt(eta)) = {}", sig4(large)).ok();
        rows.push(("v_r_star_large_gain", Value::Num(large)));
        if pvmc {
            let small = snb_reference_small_gain(p)?;
            writeln!(t, "  small-gain estimate v_r(1 - sqrt(eta)) = {}", sig4(small)).ok();
            rows.push(("v_r_star_small_gain", Value::Num(small)));
        }
    }

    if pvmc {
        let kappa = p.kappa().unwrap_or(f64::NAN);
        match hopf_duty(p)? {
            Some(d_h) => {
                let v_h = vr_of_duty(p, d_h)?;
                writeln!(t, "Hopf: D_H = {}, v_r(D_H) = {}", sig4(d_h), sig4(v_h)).ok();
                rows.push(("D_H", Value::Num(d_h)));
                rows.push(("v_r_hopf", Value::Num(v_h)));
            }
            None => {
                writeln!(t, "Hopf: no Hopf").ok();
                rows.push(("D_H", Value::Missing));
                rows.push(("v_r_hopf", Value::Missing));
            }
        }
        let thr = hopf_absent_threshold(p);
        let absent = kappa > thr;
        writeln!(t, "  no Hopf for kappa > (1+eta)(rRC/L+1)/v_s = {}: {}", sig4(thr), absent).ok();
        rows.push(("hopf_absent_threshold", Value::Num(thr)));
        rows.push(("hopf_absent", Value::Flag(absent)));
        if p.r > 0.0 {
            let ord = hopf_precedes_snb(p)?;
            writeln!(
                t,
                "  Hopf precedes SNB: {} (sufficient kappa > 2 eta (rRC/L+1)/v_s = {}: {})",
                ord.precedes,
                sig4(ord.gain_threshold),
                ord.gain_condition
            )
            .ok();
            rows.push(("hopf_precedes_snb", Value::Flag(ord.precedes)));
            rows.push(("hopf_order_gain_threshold", Value::Num(ord.gain_threshold)));
            rows.push(("hopf_order_gain_condition", Value::Flag(ord.gain_condition)));
        }
    }

    if let Some((d_s, _)) = snb {
        let cm = critical_mode_check(p, d_s)?;
        writeln!(
            t,
            "critical mode at D_S: K = {}, K_crit = {}, K* = {}, SNB excluded from DCM: {}",
            sig4(cm.k),
            sig4(cm.k_crit),
            sig4(cm.k_star),
            cm.snb_excluded
        )
        .ok();
        rows.push(("K", Value::Num(cm.k)));
        rows.push(("K_crit", Value::Num(cm.k_crit)));
        rows.push(("K_star", Value::Num(cm.k_star)));
        rows.push(("snb_excluded", Value::Flag(cm.snb_excluded)));
    }

    match dc_solution(p) {
        Ok((i, v)) => {
            writeln!(t, "DC solution: (i_L, v_C) = ({}, {})", sig4(i), sig4(v)).ok();
            rows.push(("dc_i_L", Value::Num(i)));
            rows.push(("dc_v_C", Value::Num(v)));
        }
        Err(_) => {
            writeln!(t, "DC solution: none (r = 0)").ok();
            rows.push(("dc_i_L", Value::Missing));
            rows.push(("dc_v_C", Value::Missing));
        }
    }

    let path = out_path(cfg, "analyze");
    write_file(&path, |w| {
        writeln!(w, "quantity,value")?;
        for (k, v) in &rows {
            writeln!(w, "{k},{}", v.csv())?;
        }
        Ok(())
    })?;
    Ok(CommandOutput { text: t, files: vec![path] })
}

fn class_label(c: PoleClass) -> &'static str {
    match c {
        PoleClass::Stable => "stable",
        PoleClass::OneUnstable => "one_unstable",
        PoleClass::TwoUnstable => "two_unstable",
        PoleClass::Marginal => "marginal",
    }
}

/// Coexisting averaged operating points at `v_r`, with their averaged poles where a
/// closed form exists, and optionally the matching switched-model orbits.
pub fn steady(cfg: &RunConfig, v_r: f64) -> Result<CommandOutput, CliError> {
    let p = &cfg.params;
    let model = SwitchedModel::build(p)?;
    let duties = duty_solutions(p, v_r)?;
    let mut t = String::new();
    writeln!(t, "operating points at v_r = {}", sig4(v_r)).ok();
    let mut rows = Vec::new();
    for &d in &duties {
        let (i_l, v_c) = averaged_steady_state(p, d)?;
        let poles = matches!(p.scheme, ControlScheme::Pvmc { .. })
            .then(|| characteristic_coeffs(p, d).and_then(|cc| averaged_poles(p, d).map(|pl| (cc, pl))))
            .transpose()?;
        let class = poles.map_or("n/a", |(_, pl)| class_label(pl.class));
        writeln!(t, "  averaged: D = {}, i_L = {}, v_C = {}, poles: {class}", sig4(d), sig4(i_l), sig4(v_c)).ok();
        let mut row = vec!["averaged".to_string(), fmt_num(d), fmt_num(i_l), fmt_num(v_c)];
        match poles {
            Some(((c1, c0), pl)) => {
                row.extend([c1, c0].map(fmt_num));
                for r in pl.roots {
                    row.extend([fmt_num(r.re), fmt_num(r.im)]);
                }
            }
            None => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
        row.push(class.to_string());
        rows.push(row);
    }
    let dc = dc_orbit(&model, v_r, &cfg.solver.orbit);
    if let Some(o) = &dc {
        writeln!(t, "  DC: i_L = {}, v_C = {} (D = 1)", sig4(o.x_star[0]), sig4(o.x_star[1])).ok();
        let mut row = vec!["dc".to_string(), fmt_num(1.0), fmt_num(o.x_star[0]), fmt_num(o.x_star[1])];
        row.extend(std::iter::repeat_n(String::new(), 6));
        row.push("saturated".to_string());
        rows.push(row);
    }
    if rows.is_empty() {
        writeln!(t, "  none").ok();
    }
    let path = out_path(cfg, "steady");
    write_file(&path, |w| {
        writeln!(w, "kind,duty,i_L,v_C,c1,c0,pole1_re,pole1_im,pole2_re,pole2_im,pole_class")?;
        for r in &rows {
            writeln!(w, "{}", r.join(","))?;
        }
        Ok(())
    })?;
    let mut files = vec![path];

    if cfg.steady.orbits {
        let mut orbits: Vec<Orbit> = Vec::new();
        for &d in &duties {
            if !(d > 0.0 && d < 1.0) {
                continue;
            }
            let seed = averaged_seed(&model, d, v_r)?;
            let o = find_periodic_orbit(&model, v_r, &seed, 1, &cfg.solver.orbit)?;
            if !o.converged {
                return Err(CliError::Convergence(format!(
                    "switched orbit near D = {} at v_r = {}: residual {:e} after {} Newton steps",
                    sig4(d),
                    sig4(v_r),
                    o.residual,
                    o.iterations
                )));
            }
            writeln!(
                t,
                "  switched orbit from D = {}: duty {}, {}, max|lambda| = {}",
                sig4(d),
                sig4(o.duty()),
                o.classification.label(),
                sig4(o.spectral_radius())
            )
            .ok();
            orbits.push(o);
        }
        orbits.extend(dc);
        let path = out_path(cfg, "steady_orbits");
        write_file(&path, |w| write_orbits_csv(&model, &orbits, w))?;
        files.push(path);
    }
    Ok(CommandOutput { text: t, files })
}

/// Default start: the switched-model state for the lowest averaged duty at `v_r`
/// (or the DC point when there is none), kicked by `kick` in normalized units.
fn default_x0(model: &SwitchedModel, v_r: f64, kick: f64) -> Result<DVector<f64>, CliError> {
    let duties = duty_solutions(&model.params, v_r)?;
    let base = match duties.iter().find(|d| **d > 0.0 && **d < 1.0) {
        Some(&d) => averaged_seed(model, d, v_r)?,
        None => model.dc_point().unwrap_or_else(|| DVector::zeros(model.n)),
    };
    Ok(base + model.state_scale().component_mul(&DVector::from_element(model.n, kick)))
}

/// Duty tolerance for calling the terminal pattern periodic.
pub const PATTERN_TOL: f64 = 1e-3;

/// Smallest `k <= 8` with the last cycles' duties repeating every `k` cycles.
fn duty_period(duties: &[f64]) -> Option<usize> {
    (1..=8).find(|&k| {
        let n = duties.len();
        n >= 3 * k && (n - 2 * k..n).all(|i| (duties[i] - duties[i - k]).abs() <= PATTERN_TOL)
    })
}

pub fn simulate(cfg: &RunConfig, v_r: f64, cycles: usize, x0: Option<Vec<f64>>) -> Result<CommandOutput, CliError> {
    let model = SwitchedModel::build(&cfg.params)?;
    let x0 = match x0 {
        Some(v) if v.len() == model.n => DVector::from_vec(v),
        Some(v) => {
            return Err(CliError::validation("x0", format!("expected {} values ({}), got {}", model.n, model.state_labels.join(","), v.len())))
        }
        None => default_x0(&model, v_r, cfg.simulate.kick)?,
    };
    let opts = SimOptions {
        crossing_samples: cfg.solver.orbit.crossing_samples,
        samples_per_stage: cfg.simulate.samples_per_stage,
    };
    let traj = simulate_cycles(&model, &x0, v_r, cycles, &opts)?;
    let path = out_path(cfg, "trajectory");
    write_file(&path, |w| write_trajectory_csv(&model, &traj, w))?;

    let d = &traj.cycle_duties;
    let mut t = String::new();
    writeln!(t, "simulated {cycles} cycles at v_r = {}", sig4(v_r)).ok();
    let tail: Vec<String> = d[d.len().saturating_sub(4)..].iter().map(|&x| sig4(x)).collect();
    writeln!(t, "  terminal duties: {}", tail.join(", ")).ok();
    match duty_period(d) {
        Some(k) => writeln!(t, "  terminal duty pattern: period {k}").ok(),
        None => writeln!(t, "  terminal duty pattern: not periodic (period <= 8)").ok(),
    };
    let high = traj.saturated_high.iter().filter(|b| **b).count();
    let low = traj.saturated_low.iter().filter(|b| **b).count();
    writeln!(t, "  saturated cycles: {high} at D = 1, {low} at D = 0").ok();
    let window = cycles.min(20);
    let dc = detect_dc_saturation(&model, &traj, window);
    writeln!(t, "  DC saturation: {}", if dc { "detected" } else { "not detected" }).ok();
    let fin = traj.final_state();
    let state: Vec<String> = model.state_labels.iter().zip(fin.iter()).map(|(l, v)| format!("{l} = {}", sig4(*v))).collect();
    writeln!(t, "  final state: {}", state.join(", ")).ok();
    Ok(CommandOutput { text: t, files: vec![path] })
}

pub fn run_sweep(cfg: &RunConfig, from: f64, to: f64, points: usize) -> Result<CommandOutput, CliError> {
    if from.partial_cmp(&to) != Some(std::cmp::Ordering::Less) {
        return Err(CliError::validation("from", format!("sweep needs from < to, got [{from}, {to}]")));
    }
    if points < 2 {
        return Err(CliError::validation("points", "sweep needs at least 2 points"));
    }
    let model = SwitchedModel::build(&cfg.params)?;
    let mut diagram = sweep(&model, from, to, points, &cfg.solver)?;
    locate_all(&model, &mut diagram, &cfg.solver);
    let (bp, cp) = export_diagram(&model, &diagram, &cfg.out_dir, &cfg.run_id)?;

    let mut t = String::new();
    writeln!(t, "sweep v_r in [{}, {}], {points} points", sig4(from), sig4(to)).ok();
    for (i, b) in diagram.branches.iter().enumerate() {
        let (lo, hi) = b.v_r_range();
        let stable = b.points.iter().filter(|(_, o)| o.classification.is_stable()).count();
        writeln!(
            t,
            "  branch {i} ({}, period {}T): v_r in [{}, {}], {} points, {stable} stable",
            b.origin.label(),
            b.period_mult,
            sig4(lo),
            sig4(hi),
            b.points.len()
        )
        .ok();
    }
    if diagram.critical_points.is_empty() {
        writeln!(t, "  no critical points").ok();
    }
    for c in &diagram.critical_points {
        let note = match c.kind {
            CriticalKind::SaddleNode if c.method == boostbif_core::scan::LocateMethod::Existence => " (fold)",
            _ => "",
        };
        writeln!(t, "  {}{note} on branch {}: v_r = {}, duty = {}", c.kind.label(), c.branch, sig4(c.v_r), sig4(c.duty)).ok();
    }
    Ok(CommandOutput { text: t, files: vec![bp, cp] })
}

/// Linear-interpolated zero crossings of `f` sampled on `xs`.
fn sign_changes(xs: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 0..xs.len().saturating_sub(1) {
        let (a, b) = (f[k], f[k + 1]);
        if a == 0.0 {
            out.push(xs[k]);
        } else if a * b < 0.0 {
            out.push(xs[k] + (xs[k + 1] - xs[k]) * a / (a - b));
        }
    }
    out
}

pub fn poles(cfg: &RunConfig, d_from: f64, d_to: f64, points: usize) -> Result<CommandOutput, CliError> {
    let p = &cfg.params;
    if !matches!(p.scheme, ControlScheme::Pvmc { .. }) {
        return Err(CliError::validation("scheme", "pole loci are available for pvmc only"));
    }
    if !(0.0 <= d_from && d_from < d_to && d_to < 1.0) {
        return Err(CliError::validation("d_from", format!("need 0 <= d_from < d_to < 1, got [{d_from}, {d_to}]")));
    }
    if points < 2 {
        return Err(CliError::validation("points", "need at least 2 points"));
    }
    let grid: Vec<f64> = (0..points).map(|k| d_from + (d_to - d_from) * k as f64 / (points - 1) as f64).collect();
    let mut c0s = Vec::with_capacity(points);
    let mut c1s = Vec::with_capacity(points);
    let path = out_path(cfg, "poles");
    let mut rows = Vec::with_capacity(points);
    for &d in &grid {
        let (c1, c0) = characteristic_coeffs(p, d)?;
        let pl = averaged_poles(p, d)?;
        c0s.push(c0);
        c1s.push(c1);
        let mut row = vec![fmt_num(d), fmt_num(vr_of_duty(p, d)?), fmt_num(c1), fmt_num(c0)];
        for r in pl.roots {
            row.extend([fmt_num(r.re), fmt_num(r.im)]);
        }
        row.push(class_label(pl.class).to_string());
        rows.push(row);
    }
    write_file(&path, |w| {
        writeln!(w, "duty,v_r,c1,c0,pole1_re,pole1_im,pole2_re,pole2_im,pole_class")?;
        for r in &rows {
            writeln!(w, "{}", r.join(","))?;
        }
        Ok(())
    })?;
    let mut t = String::new();
    writeln!(t, "pole loci over D in [{}, {}], {points} points", sig4(d_from), sig4(d_to)).ok();
    let list = |v: Vec<f64>| if v.is_empty() { "none".to_string() } else { v.into_iter().map(sig4).collect::<Vec<_>>().join(", ") };
    writeln!(t, "  c0 sign change at D = {}", list(sign_changes(&grid, &c0s))).ok();
    writeln!(t, "  c1 sign change at D = {}", list(sign_changes(&grid, &c1s))).ok();
    Ok(CommandOutput { text: t, files: vec![path] })
}

#[cfg(test)]
mod tests {
    use super::{duty_period, sign_changes};

    #[test]
    fn pattern_period() {
        let p2: Vec<f64> = (0..40).map(|k| if k % 2 == 0 { 0.2 } else { 0.8 }).collect();
        assert_eq!(duty_period(&p2), Some(2));
        assert_eq!(duty_period(&[0.5; 10]), Some(1));
        let drift: Vec<f64> = (0..40).map(|k| 0.3 + 0.01 * k as f64).collect();
        assert_eq!(duty_period(&drift), None);
        assert_eq!(duty_period(&[0.5]), None);
    }

    #[test]
    fn sign_changes_interpolate() {
        let xs = [0.0, 1.0, 2.0];
        assert_eq!(sign_changes(&xs, &[-1.0, 1.0, 3.0]), vec![0.5]);
        assert!(sign_changes(&xs, &[1.0, 2.0, 3.0]).is_empty());
    }
}
