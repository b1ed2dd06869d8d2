//! Exact two-stage piecewise-LTI model of a PWM boost converter.
//!
//! Within a clock period the state follows `ẋ = A1 x + B1 u` (stage S1, switch on)
//! until the compensator output `y = C x + D u` falls to the ramp `h(t)`, then
//! `ẋ = A2 x + B2 u` (stage S2) until the next clock edge. The input vector is
//! `u = (v_s, v_r)`.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::compensator::realize_type3;
use crate::error::{Error, Result};
use crate::params::{ControlScheme, ConverterParams};

/// Rising sawtooth `h(t) = V_h (t mod T)/T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampSpec {
    pub v_h: f64,
    pub period: f64,
}

impl RampSpec {
    /// Ramp value at absolute time `t`.
    pub fn at(&self, t: f64) -> f64 {
        self.v_h * t.rem_euclid(self.period) / self.period
    }

    /// Ramp value at phase `tau ∈ [0, T]` within a cycle; `tau = T` gives the left limit `V_h`.
    pub fn at_phase(&self, tau: f64) -> f64 {
        self.v_h * tau / self.period
    }

    /// Slope `V_h/T`.
    pub fn slope(&self) -> f64 {
        self.v_h / self.period
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedModel {
    pub n: usize,
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c_row: RowDVector<f64>,
    pub d_row: RowDVector<f64>,
    pub e1: RowDVector<f64>,
    pub e2: RowDVector<f64>,
    pub e: RowDVector<f64>,
    pub period: f64,
    pub ramp: RampSpec,
    pub state_labels: Vec<String>,
    pub params: ConverterParams,
}

impl SwitchedModel {
    /// Builds the model matching the configured control scheme.
    pub fn build(params: &ConverterParams) -> Result<Self> {
        match params.scheme {
            ControlScheme::Pvmc { .. } => build_pvmc_model(params),
            ControlScheme::VmcType3 { .. } => build_type3_model(params),
            ControlScheme::CmcOpenLoop | ControlScheme::CmcClosedLoop { .. } => build_cmc_model(params),
        }
    }

    pub fn input(&self, v_r: f64) -> DVector<f64> {
        DVector::from_vec(vec![self.params.v_s, v_r])
    }

    /// Compensator output `y = C x + D u`.
    pub fn output(&self, x: &DVector<f64>, v_r: f64) -> f64 {
        self.c_row.dot(&x.transpose()) + self.d_row[0] * self.params.v_s + self.d_row[1] * v_r
    }

    pub fn stage(&self, stage: Stage) -> (&DMatrix<f64>, &DMatrix<f64>) {
        match stage {
            Stage::S1 => (&self.a1, &self.b1),
            Stage::S2 => (&self.a2, &self.b2),
        }
    }

    /// The D = 1 saturated operating point `(v_s/r, 0)` embedded in the full state,
    /// if the parasitic resistance is nonzero. Compensator states are left at zero.
    pub fn dc_point(&self) -> Option<DVector<f64>> {
        if self.params.r > 0.0 {
            let mut x = DVector::zeros(self.n);
            x[0] = self.params.v_s / self.params.r;
            Some(x)
        } else {
            None
        }
    }

    /// Per-coordinate scale used for mixed-unit norms: currents by `v_s/R/(η+0.01)`,
    /// voltages by `v_s`.
    pub fn state_scale(&self) -> DVector<f64> {
        let p = &self.params;
        let mut s = DVector::from_element(self.n, p.v_s);
        s[0] = p.v_s / p.r_load / (p.eta() + 0.01);
        s
    }

    /// `‖x‖` in normalized state units.
    pub fn scaled_norm(&self, x: &DVector<f64>) -> f64 {
        let s = self.state_scale();
        x.iter().zip(s.iter()).map(|(v, s)| (v / s).powi(2)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    S1,
    S2,
}

impl Stage {
    pub fn index(self) -> u8 {
        match self {
            Stage::S1 => 1,
            Stage::S2 => 2,
        }
    }
}

/// Power-stage matrices for state `(i_L, v_C)`, including capacitor ESR `R_c`.
///
/// S1 leaves the capacitor discharging into the load through `R_c`; S2 routes the
/// inductor current into the output node. With `R_c = 0` these are the textbook
/// boost matrices. Returned rows `E1`, `E2` map the state to the output voltage.
struct PowerStage {
    a1: DMatrix<f64>,
    a2: DMatrix<f64>,
    b: DMatrix<f64>,
    e1: RowDVector<f64>,
    e2: RowDVector<f64>,
}

fn power_stage(p: &ConverterParams) -> PowerStage {
    let (l, c, r_load, r, r_c) = (p.l, p.c, p.r_load, p.r, p.r_c);
    let par = r_load + r_c;
    let k = r_load / par;
    let a1 = DMatrix::from_row_slice(2, 2, &[-r / l, 0.0, 0.0, -1.0 / (par * c)]);
    let a2 = DMatrix::from_row_slice(
        2,
        2,
        &[-(r + k * r_c) / l, -k / l, k / c, -1.0 / (par * c)],
    );
    let b = DMatrix::from_row_slice(2, 2, &[1.0 / l, 0.0, 0.0, 0.0]);
    let e1 = RowDVector::from_vec(vec![0.0, k]);
    let e2 = RowDVector::from_vec(vec![k * r_c, k]);
    PowerStage { a1, a2, b, e1, e2 }
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn assemble(
    p: &ConverterParams,
    ps: PowerStage,
    c_row: RowDVector<f64>,
    d_row: RowDVector<f64>,
) -> SwitchedModel {
    let e = (&ps.e1 + &ps.e2) * 0.5;
    SwitchedModel {
        n: 2,
        a1: ps.a1,
        a2: ps.a2,
        b1: ps.b.clone(),
        b2: ps.b,
        c_row,
        d_row,
        e1: ps.e1,
        e2: ps.e2,
        e,
        period: p.period(),
        ramp: RampSpec { v_h: p.v_h, period: p.period() },
        state_labels: labels(&["i_L", "v_C"]),
        params: *p,
    }
}

/// Proportional voltage-mode control, `y = k_p (v_r - v_C)`.
pub fn build_pvmc_model(p: &ConverterParams) -> Result<SwitchedModel> {
    let ControlScheme::Pvmc { k_p } = p.scheme else {
        return Err(Error::WrongScheme { expected: "pvmc", got: p.scheme.name() });
    };
    p.validate()?;
    let c_row = RowDVector::from_vec(vec![0.0, -k_p]);
    let d_row = RowDVector::from_vec(vec![0.0, k_p]);
    Ok(assemble(p, power_stage(p), c_row, d_row))
}

/// Peak current-mode control. The turn-off condition `i_L + h_c(t) = i_c` is written as
/// `y = i_c - i_L` meeting the rising ramp `h_c`, with `i_c = v_r` (open loop) or
/// `i_c = k_p (v_r - v_C)` (closed loop).
pub fn build_cmc_model(p: &ConverterParams) -> Result<SwitchedModel> {
    let (c_row, d_row) = match p.scheme {
        ControlScheme::CmcOpenLoop => (vec![-1.0, 0.0], vec![0.0, 1.0]),
        ControlScheme::CmcClosedLoop { k_p } => (vec![-1.0, -k_p], vec![0.0, k_p]),
        other => return Err(Error::WrongScheme { expected: "cmc_open or cmc_closed", got: other.name() }),
    };
    p.validate()?;
    Ok(assemble(p, power_stage(p), RowDVector::from_vec(c_row), RowDVector::from_vec(d_row)))
}

/// Voltage-mode control with the type-III compensator: `y = v_r + G_c(s)(v_r - v_o)`,
/// where `v_o` includes the ESR drop. State `(i_L, v_C, a, b, c)`.
pub fn build_type3_model(p: &ConverterParams) -> Result<SwitchedModel> {
    let ControlScheme::VmcType3 { k_c, z1, z2, p1, p2 } = p.scheme else {
        return Err(Error::WrongScheme { expected: "vmc_type3", got: p.scheme.name() });
    };
    p.validate()?;
    let comp = realize_type3(k_c, z1, z2, p1, p2);
    let ps = power_stage(p);
    let n = 2 + comp.order();

    let compose = |a_pow: &DMatrix<f64>, e_out: &RowDVector<f64>| {
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (2, 2)).copy_from(a_pow);
        a.view_mut((2, 2), (3, 3)).copy_from(&comp.a);
        // compensator input e = v_r - E_i x
        for i in 0..3 {
            for j in 0..2 {
                a[(2 + i, j)] = -comp.b[i] * e_out[j];
            }
        }
        a
    };
    let a1 = compose(&ps.a1, &ps.e1);
    let a2 = compose(&ps.a2, &ps.e2);
    let mut b = DMatrix::zeros(n, 2);
    b.view_mut((0, 0), (2, 2)).copy_from(&ps.b);
    for i in 0..3 {
        b[(2 + i, 1)] = comp.b[i];
    }

    let mut c_row = RowDVector::zeros(n);
    for i in 0..3 {
        c_row[2 + i] = comp.c[i];
    }
    let d_row = RowDVector::from_vec(vec![0.0, 1.0 + comp.d]);

    let pad = |e: &RowDVector<f64>| {
        let mut out = RowDVector::zeros(n);
        out[0] = e[0];
        out[1] = e[1];
        out
    };
    let e1 = pad(&ps.e1);
    let e2 = pad(&ps.e2);
    let e = (&e1 + &e2) * 0.5;
    Ok(SwitchedModel {
        n,
        a1,
        a2,
        b1: b.clone(),
        b2: b,
        c_row,
        d_row,
        e1,
        e2,
        e,
        period: p.period(),
        ramp: RampSpec { v_h: p.v_h, period: p.period() },
        state_labels: labels(&["i_L", "v_C", "comp_a", "comp_b", "comp_c"]),
        params: *p,
    })
}
