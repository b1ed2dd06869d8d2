//! Bifurcation diagrams over the reference `v_r`: branch tracking of periodic
//! orbits of the switched model, and location of fold, Neimark and
//! period-doubling points by bisection.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::averaged::duty_solutions;
use crate::error::{Error, Result};
use crate::model::SwitchedModel;
use crate::orbit::{
    averaged_seed, dc_orbit, find_periodic_orbit, fixed_duty_for_reference, Orbit, OrbitOptions, Stability,
    StroboscopicMap,
};
use crate::sim::{fmt_num, simulate_cycles, SimOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub orbit: OrbitOptions,
    /// Largest duty change between consecutive points of one branch.
    pub branch_jump: f64,
    /// Orbits closer than this in normalized state units are merged.
    pub dedup: f64,
    /// Worker threads for the seeding pass; 0 uses all available processors.
    pub jobs: usize,
    /// Seed and continue 2T-periodic orbits where a T-periodic orbit has a
    /// multiplier below -1.
    pub period2: bool,
    /// Bisection stops when the bracket is at most this fraction of `v_r`.
    pub locate_rel_tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            orbit: OrbitOptions::default(),
            branch_jump: 0.05,
            dedup: 1e-6,
            jobs: 0,
            period2: false,
            locate_rel_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchOrigin {
    AveragedLower,
    AveragedUpper,
    AveragedUnique,
    Dc,
    Period2,
}

impl BranchOrigin {
    pub fn label(self) -> &'static str {
        match self {
            BranchOrigin::AveragedLower => "averaged_lower",
            BranchOrigin::AveragedUpper => "averaged_upper",
            BranchOrigin::AveragedUnique => "averaged_unique",
            BranchOrigin::Dc => "dc",
            BranchOrigin::Period2 => "period2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub origin: BranchOrigin,
    pub period_mult: usize,
    /// `(v_r, orbit)` in increasing `v_r`, one point per grid value at most.
    pub points: Vec<(f64, Orbit)>,
    /// Grid index of each point.
    pub grid_index: Vec<usize>,
}

impl Branch {
    pub fn v_r_range(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CriticalKind {
    SaddleNode,
    Neimark,
    PeriodDoubling,
    /// A branch ends without a fold, typically where the orbit touches a clock
    /// edge (border collision).
    BranchEnd,
}

impl CriticalKind {
    pub fn label(self) -> &'static str {
        match self {
            CriticalKind::SaddleNode => "SNB",
            CriticalKind::Neimark => "Neimark",
            CriticalKind::PeriodDoubling => "PDB",
            CriticalKind::BranchEnd => "branch_end",
        }
    }
}

/// How a critical point was bracketed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocateMethod {
    /// A multiplier crosses +1, -1 or the unit circle between two branch points.
    MultiplierCrossing,
    /// The branch ceases to exist: the last orbit found versus none.
    Existence,
}

impl LocateMethod {
    pub fn label(self) -> &'static str {
        match self {
            LocateMethod::MultiplierCrossing => "multiplier",
            LocateMethod::Existence => "existence",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub kind: CriticalKind,
    pub method: LocateMethod,
    pub branch: usize,
    pub v_r: f64,
    pub duty: f64,
    pub state: DVector<f64>,
    /// Final bisection bracket on `v_r`.
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BifurcationDiagram {
    pub branches: Vec<Branch>,
    pub critical_points: Vec<CriticalPoint>,
    pub sweep_grid: Vec<f64>,
}

impl BifurcationDiagram {
    /// Periodic (non-DC) branches of the given period multiple.
    pub fn periodic_branches(&self, period_mult: usize) -> impl Iterator<Item = &Branch> {
        self.branches
            .iter()
            .filter(move |b| b.origin != BranchOrigin::Dc && b.period_mult == period_mult)
    }

    pub fn critical(&self, kind: CriticalKind) -> impl Iterator<Item = &CriticalPoint> {
        self.critical_points.iter().filter(move |c| c.kind == kind)
    }

    /// Folds where a pair of branches ceases to exist.
    pub fn folds(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.critical(CriticalKind::SaddleNode).filter(|c| c.method == LocateMethod::Existence)
    }
}

fn usable(o: &Orbit) -> bool {
    o.converged && !matches!(o.classification, Stability::Degenerate)
}

fn is_periodic(o: &Orbit) -> bool {
    usable(o) && o.classification != Stability::SaturatedDc && o.switch_times.iter().all(|t| t.is_some())
}

/// Orbits at `v_r` seeded from every averaged operating point.
fn averaged_orbits(model: &SwitchedModel, v_r: f64, opts: &OrbitOptions) -> Vec<Orbit> {
    let Ok(duties) = duty_solutions(&model.params, v_r) else { return Vec::new() };
    let mut out = Vec::new();
    for d in duties {
        if !(d > 0.0 && d < 1.0) {
            continue;
        }
        let Ok(seed) = averaged_seed(model, d, v_r) else { continue };
        if let Ok(o) = find_periodic_orbit(model, v_r, &seed, 1, opts) {
            if is_periodic(&o) {
                out.push(o);
            }
        }
    }
    out
}

/// Rotates a 2T orbit so the cycle with the larger duty comes first.
fn canonical_phase(model: &SwitchedModel, o: Orbit, opts: &OrbitOptions) -> Orbit {
    if o.period_mult != 2 || o.duties[0] >= o.duties[1] {
        return o;
    }
    let map = StroboscopicMap::new(model, o.v_r, opts.crossing_samples);
    let x1 = map.iterate(&o.x_star, 1).x;
    match find_periodic_orbit(model, o.v_r, &x1, 2, opts) {
        Ok(r) if usable(&r) => r,
        _ => o,
    }
}

/// A 2T orbit near a flip-unstable T orbit: the settled state of a short
/// simulation from a perturbed start, polished by Newton.
fn period2_from(model: &SwitchedModel, t_orbit: &Orbit, opts: &OrbitOptions) -> Option<Orbit> {
    let flip = t_orbit.multipliers.iter().any(|l| l.im == 0.0 && l.re < -1.0);
    if !flip {
        return None;
    }
    let scale = model.state_scale();
    let x0 = &t_orbit.x_star + scale.component_mul(&DVector::from_element(model.n, 1e-3));
    let sim = SimOptions { crossing_samples: opts.crossing_samples, samples_per_stage: 0 };
    let traj = simulate_cycles(model, &x0, t_orbit.v_r, 400, &sim).ok()?;
    period2_polish(model, t_orbit.v_r, traj.final_state(), opts)
}

fn period2_polish(model: &SwitchedModel, v_r: f64, seed: &DVector<f64>, opts: &OrbitOptions) -> Option<Orbit> {
    let o = find_periodic_orbit(model, v_r, seed, 2, opts).ok()?;
    if !is_periodic(&o) || (o.duties[0] - o.duties[1]).abs() < 1e-4 {
        return None;
    }
    Some(canonical_phase(model, o, opts))
}

fn push_unique(model: &SwitchedModel, set: &mut Vec<Orbit>, o: Orbit, tol: f64) {
    let dup = set.iter().any(|e| {
        e.period_mult == o.period_mult
            && e.classification == o.classification
            && model.scaled_norm(&(&e.x_star - &o.x_star)) < tol.max(1e3 * e.residual.max(o.residual))
    });
    if !dup {
        set.push(o);
    }
}

fn branch_duty(o: &Orbit) -> f64 {
    o.duties.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Sweeps `v_r` over `n_points` evenly spaced values in `[v_r_min, v_r_max]`,
/// tracking every periodic orbit found from averaged seeds, from the previous grid
/// point, and from the saturated DC solution. Critical points are not located here;
/// see [`locate_all`].
pub fn sweep(
    model: &SwitchedModel,
    v_r_min: f64,
    v_r_max: f64,
    n_points: usize,
    opts: &SweepOptions,
) -> Result<BifurcationDiagram> {
    if v_r_min.partial_cmp(&v_r_max) != Some(std::cmp::Ordering::Less) || !v_r_min.is_finite() || !v_r_max.is_finite() {
        return Err(Error::InvalidParameter { name: "v_r range", reason: format!("need from < to, got [{v_r_min}, {v_r_max}]") });
    }
    if n_points < 2 {
        return Err(Error::InvalidParameter { name: "points", reason: format!("need at least 2, got {n_points}") });
    }
    let grid: Vec<f64> = (0..n_points)
        .map(|k| v_r_min + (v_r_max - v_r_min) * k as f64 / (n_points - 1) as f64)
        .collect();
    let oo = &opts.orbit;

    // Independent seeding pass: averaged seeds and the DC orbit per grid value.
    let seeded_at = |v: &f64| {
        let mut set = averaged_orbits(model, *v, oo);
        if let Some(dc) = dc_orbit(model, *v, oo) {
            set.push(dc);
        }
        set
    };
    let seeded: Vec<Vec<Orbit>> = if opts.jobs == 1 {
        grid.iter().map(seeded_at).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::InvalidParameter { name: "jobs", reason: e.to_string() })?;
        pool.install(|| grid.par_iter().map(seeded_at).collect())
    };

    // Sequential continuation pass and branch assembly.
    let mut branches: Vec<Branch> = Vec::new();
    let mut previous: Vec<Orbit> = Vec::new();
    for (i, (&v, base)) in grid.iter().zip(seeded).enumerate() {
        let mut set: Vec<Orbit> = Vec::new();
        for o in base {
            push_unique(model, &mut set, o, opts.dedup);
        }
        // Subharmonic orbits continued by Newton keep their parent, since their duties
        // can move faster than `branch_jump` near a flip.
        let mut lineage: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
        for prev in previous.iter().filter(|o| o.classification != Stability::SaturatedDc) {
            if let Ok(o) = find_periodic_orbit(model, v, &prev.x_star, prev.period_mult, oo) {
                let subharmonic = prev.period_mult > 1;
                if is_periodic(&o) && (subharmonic || (branch_duty(&o) - branch_duty(prev)).abs() <= opts.branch_jump) {
                    let o = canonical_phase(model, o, oo);
                    if subharmonic {
                        lineage.push((o.x_star.clone(), prev.x_star.clone()));
                    }
                    push_unique(model, &mut set, o, opts.dedup);
                }
            }
        }
        if opts.period2 {
            let t_orbits: Vec<Orbit> = set.iter().filter(|o| o.period_mult == 1 && is_periodic(o)).cloned().collect();
            let have_p2 = set.iter().any(|o| o.period_mult == 2);
            if !have_p2 {
                for t in &t_orbits {
                    if let Some(p2) = period2_from(model, t, oo) {
                        push_unique(model, &mut set, p2, opts.dedup);
                    }
                }
            }
        }
        set.sort_by(|a, b| {
            a.period_mult
                .cmp(&b.period_mult)
                .then((a.classification == Stability::SaturatedDc).cmp(&(b.classification == Stability::SaturatedDc)))
                .then(branch_duty(a).total_cmp(&branch_duty(b)))
        });
        attach(model, &mut branches, &set, &lineage, i, v, opts);
        previous = set;
    }
    Ok(BifurcationDiagram { branches, critical_points: Vec::new(), sweep_grid: grid })
}

/// `lineage` pairs a continued subharmonic orbit's state with its parent's state.
fn attach(
    model: &SwitchedModel,
    branches: &mut Vec<Branch>,
    set: &[Orbit],
    lineage: &[(DVector<f64>, DVector<f64>)],
    i: usize,
    v: f64,
    opts: &SweepOptions,
) {
    let averaged = duty_solutions(&model.params, v).unwrap_or_default();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (bi, b) in branches.iter().enumerate() {
        if b.grid_index.last() != Some(&(i.wrapping_sub(1))) {
            continue;
        }
        let last = &b.points[b.points.len() - 1].1;
        for (oi, o) in set.iter().enumerate() {
            let dc = o.classification == Stability::SaturatedDc;
            if o.period_mult != b.period_mult || dc != (b.origin == BranchOrigin::Dc) {
                continue;
            }
            let dd = (branch_duty(o) - branch_duty(last)).abs();
            let child = lineage.iter().any(|(x, parent)| *x == o.x_star && *parent == last.x_star);
            if dd <= opts.branch_jump || child {
                pairs.push((dd + model.scaled_norm(&(&o.x_star - &last.x_star)), bi, oi));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_b = vec![false; branches.len()];
    let mut used_o = vec![false; set.len()];
    for (_, bi, oi) in pairs {
        if used_b[bi] || used_o[oi] {
            continue;
        }
        used_b[bi] = true;
        used_o[oi] = true;
        branches[bi].points.push((v, set[oi].clone()));
        branches[bi].grid_index.push(i);
    }
    for (oi, o) in set.iter().enumerate() {
        if used_o[oi] {
            continue;
        }
        let origin = if o.classification == Stability::SaturatedDc {
            BranchOrigin::Dc
        } else if o.period_mult > 1 {
            BranchOrigin::Period2
        } else if averaged.len() >= 2 {
            let d = o.duty();
            let nearest = averaged
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - d).abs().total_cmp(&(b.1 - d).abs()))
                .map(|(k, _)| k)
                .unwrap_or(0);
            if nearest == 0 { BranchOrigin::AveragedLower } else { BranchOrigin::AveragedUpper }
        } else {
            BranchOrigin::AveragedUnique
        };
        branches.push(Branch { origin, period_mult: o.period_mult, points: vec![(v, o.clone())], grid_index: vec![i] });
    }
}

fn real_beyond(o: &Orbit, sign: f64) -> usize {
    o.multipliers.iter().filter(|l| l.im == 0.0 && sign * l.re > 1.0).count()
}

/// Integer whose change between two orbits signals a crossing of `kind`: the
/// parity of real multipliers beyond +1 (SNB) or -1 (PDB), so a complex pair
/// splitting into two reals does not register; for Neimark the number of
/// multipliers outside the unit circle, used only where the real parities agree.
fn indicator(o: &Orbit, kind: CriticalKind) -> usize {
    match kind {
        CriticalKind::SaddleNode | CriticalKind::BranchEnd => real_beyond(o, 1.0) % 2,
        CriticalKind::PeriodDoubling => real_beyond(o, -1.0) % 2,
        CriticalKind::Neimark => o.multipliers.iter().filter(|l| l.norm() > 1.0).count(),
    }
}

fn brackets(a: &Orbit, b: &Orbit, kind: CriticalKind) -> bool {
    let changed = |k| indicator(a, k) != indicator(b, k);
    match kind {
        CriticalKind::Neimark => {
            changed(kind) && !changed(CriticalKind::SaddleNode) && !changed(CriticalKind::PeriodDoubling)
        }
        _ => changed(kind),
    }
}

/// Orbit near `seed` at `v_r`, if one exists with the seed's period and duty
/// pattern. Falls back to the exact fixed-duty orbit as a seed for T-periodic
/// branches, which helps where multipliers are large.
fn continue_orbit(model: &SwitchedModel, v_r: f64, seed: &Orbit, opts: &SweepOptions) -> Option<Orbit> {
    let accept = |o: Orbit| (is_periodic(&o) && (branch_duty(&o) - branch_duty(seed)).abs() <= opts.branch_jump).then_some(o);
    let direct = find_periodic_orbit(model, v_r, &seed.x_star, seed.period_mult, &opts.orbit).ok().and_then(accept);
    if direct.is_some() || seed.period_mult != 1 {
        return direct;
    }
    let fd = fixed_duty_for_reference(model, v_r, seed.duty()).ok()?;
    if !fd.realizable || (fd.v_r - v_r).abs() > 1e-8 * v_r.abs().max(1.0) {
        return None;
    }
    find_periodic_orbit(model, v_r, &fd.x_star, 1, &opts.orbit).ok().and_then(accept)
}

/// Bisection on a multiplier-count change between branch points `a` and `b`.
fn bisect_indicator(
    model: &SwitchedModel,
    a: &Orbit,
    b: &Orbit,
    kind: CriticalKind,
    bi: usize,
    opts: &SweepOptions,
) -> Option<CriticalPoint> {
    let (mut lo, mut hi) = (a.clone(), b.clone());
    let target = indicator(&lo, kind);
    while (hi.v_r - lo.v_r).abs() > opts.locate_rel_tol * lo.v_r.abs().max(1e-12) {
        let mid = 0.5 * (lo.v_r + hi.v_r);
        let o = continue_orbit(model, mid, &lo, opts).or_else(|| continue_orbit(model, mid, &hi, opts))?;
        if indicator(&o, kind) == target {
            lo = o;
        } else {
            hi = o;
        }
    }
    let v_r = 0.5 * (lo.v_r + hi.v_r);
    Some(CriticalPoint {
        kind,
        method: LocateMethod::MultiplierCrossing,
        branch: bi,
        v_r,
        duty: 0.5 * (lo.duty() + hi.duty()),
        state: lo.x_star.clone(),
        bracket: (lo.v_r.min(hi.v_r), lo.v_r.max(hi.v_r)),
    })
}

/// Bisection on existence past the end of a branch: `last` exists at its `v_r`,
/// nothing on the branch exists at `beyond`.
fn bisect_existence(
    model: &SwitchedModel,
    last: &Orbit,
    beyond: f64,
    bi: usize,
    opts: &SweepOptions,
) -> CriticalPoint {
    let mut lo = last.clone();
    let mut hi = beyond;
    while (hi - lo.v_r).abs() > opts.locate_rel_tol * lo.v_r.abs().max(1e-12) {
        let mid = 0.5 * (lo.v_r + hi);
        match continue_orbit(model, mid, &lo, opts) {
            Some(o) => lo = o,
            None => hi = mid,
        }
    }
    let near_one = lo.multipliers.iter().any(|l| l.im == 0.0 && (l.re - 1.0).abs() < 0.25);
    CriticalPoint {
        kind: if near_one { CriticalKind::SaddleNode } else { CriticalKind::BranchEnd },
        method: LocateMethod::Existence,
        branch: bi,
        v_r: 0.5 * (lo.v_r + hi),
        duty: lo.duty(),
        state: lo.x_star.clone(),
        bracket: (lo.v_r.min(hi), lo.v_r.max(hi)),
    }
}

/// Locates the first critical point of `kind` on branch `bi`: a multiplier
/// crossing (through -1 for PDB, a complex pair through the unit circle for
/// Neimark, a real multiplier through +1 for SNB), or for SNB a fold where the
/// branch ceases to exist inside the sweep range.
pub fn locate_bifurcation(
    model: &SwitchedModel,
    diagram: &BifurcationDiagram,
    bi: usize,
    kind: CriticalKind,
    opts: &SweepOptions,
) -> Result<CriticalPoint> {
    let no_bracket = || Error::NoBracket { branch: bi, kind: kind.label() };
    let branch = diagram.branches.get(bi).ok_or_else(no_bracket)?;
    locate_on_branch(model, diagram, bi, kind, opts)
        .into_iter()
        .find(|c| c.kind == kind)
        .filter(|_| branch.origin != BranchOrigin::Dc)
        .ok_or_else(no_bracket)
}

fn locate_on_branch(
    model: &SwitchedModel,
    diagram: &BifurcationDiagram,
    bi: usize,
    kind: CriticalKind,
    opts: &SweepOptions,
) -> Vec<CriticalPoint> {
    let branch = &diagram.branches[bi];
    let mut out = Vec::new();
    match kind {
        CriticalKind::Neimark | CriticalKind::PeriodDoubling => {
            for w in branch.points.windows(2) {
                if brackets(&w[0].1, &w[1].1, kind) {
                    out.extend(bisect_indicator(model, &w[0].1, &w[1].1, kind, bi, opts));
                }
            }
        }
        CriticalKind::SaddleNode | CriticalKind::BranchEnd => {
            for w in branch.points.windows(2) {
                if brackets(&w[0].1, &w[1].1, CriticalKind::SaddleNode) {
                    out.extend(bisect_indicator(model, &w[0].1, &w[1].1, CriticalKind::SaddleNode, bi, opts));
                }
            }
            let grid = &diagram.sweep_grid;
            let first = branch.grid_index[0];
            let last = branch.grid_index[branch.grid_index.len() - 1];
            if branch.period_mult == 1 && last + 1 < grid.len() {
                out.push(bisect_existence(model, &branch.points[branch.points.len() - 1].1, grid[last + 1], bi, opts));
            }
            if branch.period_mult == 1 && first > 0 {
                out.push(bisect_existence(model, &branch.points[0].1, grid[first - 1], bi, opts));
            }
        }
    }
    out
}

/// Locates every critical point on every non-DC branch and stores them in the
/// diagram, sorted by kind then `v_r`. Folds reached from both sides are merged.
pub fn locate_all(model: &SwitchedModel, diagram: &mut BifurcationDiagram, opts: &SweepOptions) {
    let mut found = Vec::new();
    for (bi, b) in diagram.branches.iter().enumerate() {
        if b.origin == BranchOrigin::Dc {
            continue;
        }
        for kind in [CriticalKind::SaddleNode, CriticalKind::Neimark, CriticalKind::PeriodDoubling] {
            found.extend(locate_on_branch(model, diagram, bi, kind, opts));
        }
    }
    found.sort_by(|a, b| {
        (a.kind as u8)
            .cmp(&(b.kind as u8))
            .then((a.method as u8).cmp(&(b.method as u8)))
            .then(a.v_r.total_cmp(&b.v_r))
            .then(a.branch.cmp(&b.branch))
    });
    let mut merged: Vec<CriticalPoint> = Vec::new();
    for c in found {
        let dup = merged.last().is_some_and(|m| {
            m.kind == c.kind
                && m.method == c.method
                && c.kind == CriticalKind::SaddleNode
                && (m.v_r - c.v_r).abs() <= 10.0 * opts.locate_rel_tol * c.v_r.abs()
        });
        if !dup {
            merged.push(c);
        }
    }
    diagram.critical_points = merged;
}

/// Writes `<run_id>_branches.csv` and `<run_id>_critical.csv` into `dir` and
/// returns their paths.
pub fn export_diagram(model: &SwitchedModel, diagram: &BifurcationDiagram, dir: &Path, run_id: &str) -> Result<(PathBuf, PathBuf)> {
    let bp = dir.join(format!("{run_id}_branches.csv"));
    let cp = dir.join(format!("{run_id}_critical.csv"));
    let io = |path: &Path| {
        let p = path.display().to_string();
        move |source| Error::Io { path: p, source }
    };
    let mut w = BufWriter::new(File::create(&bp).map_err(io(&bp))?);
    write_branches_csv(model, diagram, &mut w).and_then(|_| w.flush()).map_err(io(&bp))?;
    let mut w = BufWriter::new(File::create(&cp).map_err(io(&cp))?);
    write_critical_csv(model, diagram, &mut w).and_then(|_| w.flush()).map_err(io(&cp))?;
    Ok((bp, cp))
}

/// Branch rows: branch id, origin, period multiple, `v_r`, duties, clock-instant
/// `i_L` and `v_C`, stability, spectral radius and each multiplier as re/im.
pub fn write_branches_csv<W: Write>(model: &SwitchedModel, diagram: &BifurcationDiagram, w: &mut W) -> std::io::Result<()> {
    let mut header: Vec<String> = [
        "branch_id", "origin", "period_mult", "v_r", "duty", "duty_min", "i_L_at_clock", "v_C_at_clock", "stability",
        "unstable_count", "max_abs_lambda",
    ]
    .map(String::from)
    .to_vec();
    for i in 1..=model.n {
        header.push(format!("lambda{i}_re"));
        header.push(format!("lambda{i}_im"));
    }
    writeln!(w, "{}", header.join(","))?;
    for (bi, b) in diagram.branches.iter().enumerate() {
        for (v, o) in &b.points {
            let count = match o.classification {
                Stability::Unstable { count } => count,
                _ => 0,
            };
            let mut row = vec![
                bi.to_string(),
                b.origin.label().to_string(),
                b.period_mult.to_string(),
                fmt_num(*v),
                fmt_num(branch_duty(o)),
                fmt_num(o.duties.iter().cloned().fold(f64::INFINITY, f64::min)),
                fmt_num(o.x_star[0]),
                fmt_num(o.x_star[1]),
                o.classification.label().to_string(),
                count.to_string(),
                fmt_num(o.spectral_radius()),
            ];
            for i in 0..model.n {
                match o.multipliers.get(i) {
                    Some(l) => {
                        row.push(fmt_num(l.re));
                        row.push(fmt_num(l.im));
                    }
                    None => row.extend([String::new(), String::new()]),
                }
            }
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

/// Critical-point rows: kind, branch id, `v_r`, duty, bracket, clock-instant state.
pub fn write_critical_csv<W: Write>(model: &SwitchedModel, diagram: &BifurcationDiagram, w: &mut W) -> std::io::Result<()> {
    let mut header: Vec<String> = ["kind", "method", "branch_id", "v_r", "duty", "bracket_lo", "bracket_hi"].map(String::from).to_vec();
    header.extend(model.state_labels.iter().map(|l| format!("x_{l}")));
    writeln!(w, "{}", header.join(","))?;
    for c in &diagram.critical_points {
        let mut row = vec![
            c.kind.label().to_string(),
            c.method.label().to_string(),
            c.branch.to_string(),
            fmt_num(c.v_r),
            fmt_num(c.duty),
            fmt_num(c.bracket.0),
            fmt_num(c.bracket.1),
        ];
        row.extend(c.state.iter().map(|&v| fmt_num(v)));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
