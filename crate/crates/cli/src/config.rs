//! Line-based run configuration.
//!
//! ```text
//! # comment
//! [converter]
//! v_s = 3
//! L = 1e-6
//! ```
//!
//! Keys are case-sensitive (`R` is the load, `r` the inductor resistance) and
//! belong to the most recent `[section]`. Unknown sections and keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use boostbif_core::orbit::OrbitOptions;
use boostbif_core::scan::SweepOptions;
use boostbif_core::{ControlScheme, ConverterParams};

use crate::error::CliError;

const SECTIONS: &[(&str, &[&str])] = &[
    ("converter", &["v_s", "L", "C", "R", "r", "R_c", "V_h", "f_s"]),
    ("control", &["scheme", "k_p", "K_c", "z1", "z2", "p1", "p2"]),
    ("sweep", &["from", "to", "points", "period2"]),
    ("simulate", &["v_r", "cycles", "x0", "kick", "samples_per_stage"]),
    ("steady", &["v_r", "orbits"]),
    ("poles", &["d_from", "d_to", "points"]),
    (
        "solver",
        &[
            "newton_tol", "max_iter", "max_halvings", "crossing_samples", "grazing", "fd_rel", "branch_jump", "dedup",
            "locate_rel_tol",
        ],
    ),
    ("output", &["dir", "run_id"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub period2: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub v_r: Option<f64>,
    pub cycles: usize,
    pub x0: Option<Vec<f64>>,
    pub kick: f64,
    pub samples_per_stage: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyConfig {
    pub v_r: Option<f64>,
    pub orbits: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolesConfig {
    pub d_from: f64,
    pub d_to: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ConverterParams,
    pub sweep: SweepConfig,
    pub simulate: SimulateConfig,
    pub steady: SteadyConfig,
    pub poles: PolesConfig,
    pub solver: SweepOptions,
    pub out_dir: PathBuf,
    pub run_id: String,
}

/// Raw `key -> (value, line)` map per section.
type Raw = BTreeMap<String, BTreeMap<String, (String, usize)>>;

fn tokenize(text: &str) -> Result<Raw, CliError> {
    let mut raw: Raw = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| CliError::parse(line_no, format!("malformed section header `{body}`")))?
                .trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(CliError::parse(line_no, format!("unknown section `[{name}]`")));
            }
            raw.entry(name.to_string()).or_default();
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| CliError::parse(line_no, format!("expected `key = value`, got `{body}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(CliError::parse(line_no, "empty key"));
        }
        let sec = section
            .as_ref()
            .ok_or_else(|| CliError::parse(line_no, format!("key `{key}` appears before any [section]")))?;
        let allowed = SECTIONS.iter().find(|(s, _)| s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(CliError::parse(line_no, format!("unknown key `{key}` in [{sec}]")));
        }
        let entries = raw.get_mut(sec).expect("section registered");
        if entries.insert(key.to_string(), (value.to_string(), line_no)).is_some() {
            return Err(CliError::parse(line_no, format!("duplicate key `{key}` in [{sec}]")));
        }
    }
    Ok(raw)
}

struct Section<'a> {
    name: &'static str,
    entries: Option<&'a BTreeMap<String, (String, usize)>>,
}

impl Section<'_> {
    fn get(&self, key: &str) -> Option<&(String, usize)> {
        self.entries.and_then(|e| e.get(key))
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| CliError::parse(*line, format!("`{key}` expects a finite number, got `{v}`"))),
        }
    }

    fn f64_req(&self, key: &'static str) -> Result<f64, CliError> {
        self.f64_opt(key)?
            .ok_or_else(|| CliError::validation(key, format!("missing required key in [{}]", self.name)))
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some((v, line)) => v
                .parse::<usize>()
                .map_err(|_| CliError::parse(*line, format!("`{key}` expects a non-negative integer, got `{v}`"))),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some((v, line)) => match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(CliError::parse(*line, format!("`{key}` expects true or false, got `{v}`"))),
            },
        }
    }

    fn list_opt(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, line)) => parse_list(v).map(Some).map_err(|e| CliError::parse(*line, format!("`{key}`: {e}"))),
        }
    }

    fn str_opt(&self, key: &str) -> Option<&str> {
        self.get(key).map(|(v, _)| v.as_str())
    }
}

/// Comma-separated finite numbers.
pub fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| format!("`{s}` is not a finite number"))
        })
        .collect()
}

fn positive(key: &'static str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::validation(key, format!("must be positive, got {v}")))
    }
}

fn non_negative(key: &'static str, v: f64) -> Result<f64, CliError> {
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(CliError::validation(key, format!("must be non-negative, got {v}")))
    }
}

fn scheme(ctl: &Section) -> Result<ControlScheme, CliError> {
    let name = ctl
        .str_opt("scheme")
        .ok_or_else(|| CliError::validation("scheme", "missing required key in [control]"))?;
    let k_p = |ctl: &Section| ctl.f64_req("k_p").and_then(|v| positive("k_p", v));
    let s = match name {
        "pvmc" => ControlScheme::Pvmc { k_p: k_p(ctl)? },
        "cmc_closed" => ControlScheme::CmcClosedLoop { k_p: k_p(ctl)? },
        "cmc_open" => ControlScheme::CmcOpenLoop,
        "vmc_type3" => ControlScheme::VmcType3 {
            k_c: positive("K_c", ctl.f64_req("K_c")?)?,
            z1: positive("z1", ctl.f64_req("z1")?)?,
            z2: positive("z2", ctl.f64_req("z2")?)?,
            p1: positive("p1", ctl.f64_req("p1")?)?,
            p2: positive("p2", ctl.f64_req("p2")?)?,
        },
        other => {
            return Err(CliError::validation(
                "scheme",
                format!("unknown scheme `{other}`; expected pvmc, vmc_type3, cmc_open or cmc_closed"),
            ))
        }
    };
    Ok(s)
}

/// Parses and validates a configuration, applying defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let raw = tokenize(text)?;
    let sec = |name: &'static str| Section { name, entries: raw.get(name) };
    let conv = sec("converter");

    let scheme = scheme(&sec("control"))?;
    let voltage_mode = matches!(scheme, ControlScheme::Pvmc { .. } | ControlScheme::VmcType3 { .. });
    let v_h = match conv.f64_opt("V_h")? {
        Some(v) => non_negative("V_h", v)?,
        None if voltage_mode => return Err(CliError::validation("V_h", "missing required key in [converter]")),
        None => 0.0,
    };
    if voltage_mode && v_h == 0.0 {
        return Err(CliError::validation("V_h", "voltage-mode schemes need a positive ramp amplitude"));
    }
    let params = ConverterParams::new(
        positive("v_s", conv.f64_req("v_s")?)?,
        positive("L", conv.f64_req("L")?)?,
        positive("C", conv.f64_req("C")?)?,
        positive("R", conv.f64_req("R")?)?,
        non_negative("r", conv.f64_req("r")?)?,
        non_negative("R_c", conv.f64_or("R_c", 0.0)?)?,
        v_h,
        positive("f_s", conv.f64_req("f_s")?)?,
        scheme,
    )
    .map_err(|e| CliError::validation("converter", e.to_string()))?;

    let sw = sec("sweep");
    let sweep = SweepConfig {
        from: sw.f64_or("from", 0.0)?,
        to: sw.f64_or("to", 0.0)?,
        points: sw.usize_or("points", 101)?,
        period2: sw.bool_or("period2", false)?,
    };

    let si = sec("simulate");
    let simulate = SimulateConfig {
        v_r: si.f64_opt("v_r")?,
        cycles: si.usize_or("cycles", 1000)?,
        x0: si.list_opt("x0")?,
        kick: si.f64_or("kick", 1e-3)?,
        samples_per_stage: si.usize_or("samples_per_stage", 8)?,
    };
    if simulate.cycles == 0 {
        return Err(CliError::validation("cycles", "must be at least 1"));
    }

    let st = sec("steady");
    let steady = SteadyConfig { v_r: st.f64_opt("v_r")?, orbits: st.bool_or("orbits", true)? };

    let po = sec("poles");
    let poles = PolesConfig {
        d_from: po.f64_or("d_from", 0.0)?,
        d_to: po.f64_or("d_to", 0.95)?,
        points: po.usize_or("points", 191)?,
    };

    let so = sec("solver");
    let od = OrbitOptions::default();
    let sd = SweepOptions::default();
    let orbit = OrbitOptions {
        newton_tol: positive("newton_tol", so.f64_or("newton_tol", od.newton_tol)?)?,
        max_iter: so.usize_or("max_iter", od.max_iter)?,
        max_halvings: so.usize_or("max_halvings", od.max_halvings)?,
        crossing_samples: so.usize_or("crossing_samples", od.crossing_samples)?.max(1),
        grazing: positive("grazing", so.f64_or("grazing", od.grazing)?)?,
        fd_rel: positive("fd_rel", so.f64_or("fd_rel", od.fd_rel)?)?,
        preserve_pattern: od.preserve_pattern,
    };
    let solver = SweepOptions {
        orbit,
        branch_jump: positive("branch_jump", so.f64_or("branch_jump", sd.branch_jump)?)?,
        dedup: positive("dedup", so.f64_or("dedup", sd.dedup)?)?,
        jobs: sd.jobs,
        period2: sweep.period2,
        locate_rel_tol: positive("locate_rel_tol", so.f64_or("locate_rel_tol", sd.locate_rel_tol)?)?,
    };

    let out = sec("output");
    let run_id = out.str_opt("run_id").unwrap_or("run").to_string();
    validate_run_id(&run_id)?;
    Ok(RunConfig {
        params,
        sweep,
        simulate,
        steady,
        poles,
        solver,
        out_dir: PathBuf::from(out.str_opt("dir").unwrap_or(".")),
        run_id,
    })
}

pub fn validate_run_id(id: &str) -> Result<(), CliError> {
    let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
    if ok {
        Ok(())
    } else {
        Err(CliError::validation("run_id", format!("`{id}` must be non-empty and use only letters, digits, `-`, `_`, `.`")))
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX1: &str = "\
# Example 1
[converter]
v_s = 3
V_h = 1
f_s = 600e3
L = 1e-6
C = 100e-6
R = 2
r = 0.1

[control]
scheme = pvmc
k_p = 2
";

    #[test]
    fn parses_example1() {
        let c = parse_config(EX1).unwrap();
        let p = c.params;
        assert_eq!((p.v_s, p.v_h, p.f_s, p.l, p.c, p.r_load, p.r, p.r_c), (3.0, 1.0, 600e3, 1e-6, 100e-6, 2.0, 0.1, 0.0));
        assert_eq!(p.scheme, ControlScheme::Pvmc { k_p: 2.0 });
        assert_eq!(c.run_id, "run");
        assert_eq!(c.solver.orbit, OrbitOptions::default());
        assert_eq!(c.poles, PolesConfig { d_from: 0.0, d_to: 0.95, points: 191 });
    }

    fn err_of(text: &str) -> CliError {
        parse_config(text).unwrap_err()
    }

    #[test]
    fn missing_v_s_names_key() {
        let e = err_of(&EX1.replace("v_s = 3\n", ""));
        assert!(matches!(&e, CliError::Validation { key, .. } if key == "v_s"), "{e}");
    }

    #[test]
    fn negative_r_rejected() {
        let e = err_of(&EX1.replace("r = 0.1", "r = -0.1"));
        assert!(matches!(&e, CliError::Validation { key, .. } if key == "r"), "{e}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = err_of(&EX1.replace("R = 2", "R = two"));
        assert!(matches!(e, CliError::Parse { line: 8, .. }), "{e}");
        let e = err_of(&EX1.replace("k_p = 2", "gain = 2"));
        assert!(matches!(e, CliError::Parse { line: 13, .. }), "{e}");
        let e = err_of("v_s = 3\n");
        assert!(matches!(e, CliError::Parse { line: 1, .. }));
        let e = err_of("[converter\n");
        assert!(matches!(e, CliError::Parse { line: 1, .. }));
        let e = err_of("[plots]\n");
        assert!(matches!(e, CliError::Parse { line: 1, .. }));
        let e = err_of(&format!("{EX1}\n[converter]\nv_s = 4\n"));
        assert!(matches!(e, CliError::Parse { line: 16, .. }), "{e}");
    }

    #[test]
    fn case_distinguishes_load_and_parasitic() {
        let c = parse_config(&EX1.replace("R = 2", "R = 5")).unwrap();
        assert_eq!((c.params.r_load, c.params.r), (5.0, 0.1));
    }

    #[test]
    fn voltage_mode_needs_ramp() {
        let e = err_of(&EX1.replace("V_h = 1\n", ""));
        assert!(matches!(&e, CliError::Validation { key, .. } if key == "V_h"));
        let cmc = EX1.replace("V_h = 1\n", "").replace("scheme = pvmc", "scheme = cmc_closed");
        assert_eq!(parse_config(&cmc).unwrap().params.v_h, 0.0);
    }

    #[test]
    fn scheme_keys() {
        let e = err_of(&EX1.replace("scheme = pvmc", "scheme = pid"));
        assert!(matches!(&e, CliError::Validation { key, .. } if key == "scheme"));
        let e = err_of(&EX1.replace("scheme = pvmc", "scheme = vmc_type3"));
        assert!(matches!(&e, CliError::Validation { key, .. } if key == "K_c"));
        let c = parse_config(&EX1.replace("scheme = pvmc\nk_p = 2", "scheme = cmc_open")).unwrap();
        assert_eq!(c.params.scheme, ControlScheme::CmcOpenLoop);
    }

    #[test]
    fn sections_and_defaults() {
        let text = format!(
            "{EX1}\n[sweep]\nfrom = 3\nto = 8 # inline comment\npoints = 11\nperiod2 = true\n\
             [simulate]\nx0 = 29, 0.1\ncycles = 50\n[output]\nrun_id = ex1\ndir = out\n[solver]\nnewton_tol = 1e-11\n"
        );
        let c = parse_config(&text).unwrap();
        assert_eq!(c.sweep, SweepConfig { from: 3.0, to: 8.0, points: 11, period2: true });
        assert!(c.solver.period2);
        assert_eq!(c.simulate.x0, Some(vec![29.0, 0.1]));
        assert_eq!(c.simulate.cycles, 50);
        assert_eq!(c.solver.orbit.newton_tol, 1e-11);
        assert_eq!((c.run_id.as_str(), c.out_dir.as_path()), ("ex1", Path::new("out")));
        let e = err_of(&format!("{EX1}\n[output]\nrun_id = a/b\n"));
        assert!(matches!(&e, CliError::Validation { key, .. } if key == "run_id"));
    }
}
