//! Converter parameters and control-scheme selection.

use crate::error::{Error, Result};

/// Feedback arrangement around the boost power stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlScheme {
    /// Proportional voltage-mode control, `y = k_p (v_r - v_C)`.
    Pvmc { k_p: f64 },
    /// Voltage-mode control through an integrator + two-zero + two-pole compensator.
    /// Zero and pole locations are in rad/s.
    VmcType3 {
        k_c: f64,
        z1: f64,
        z2: f64,
        p1: f64,
        p2: f64,
    },
    /// Peak current-mode control with the voltage loop open; `v_r` is the current command.
    CmcOpenLoop,
    /// Peak current-mode control with a proportional voltage loop, `i_c = k_p (v_r - v_C)`.
    CmcClosedLoop { k_p: f64 },
}

impl ControlScheme {
    pub fn name(&self) -> &'static str {
        match self {
            ControlScheme::Pvmc { .. } => "pvmc",
            ControlScheme::VmcType3 { .. } => "vmc_type3",
            ControlScheme::CmcOpenLoop => "cmc_open",
            ControlScheme::CmcClosedLoop { .. } => "cmc_closed",
        }
    }

    /// Proportional gain for the schemes that have one.
    pub fn k_p(&self) -> Option<f64> {
        match *self {
            ControlScheme::Pvmc { k_p } | ControlScheme::CmcClosedLoop { k_p } => Some(k_p),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                })
            }
        };
        match *self {
            ControlScheme::Pvmc { k_p } | ControlScheme::CmcClosedLoop { k_p } => check("k_p", k_p),
            ControlScheme::VmcType3 { k_c, z1, z2, p1, p2 } => {
                check("K_c", k_c)?;
                check("z1", z1)?;
                check("z2", z2)?;
                check("p1", p1)?;
                check("p2", p2)
            }
            ControlScheme::CmcOpenLoop => Ok(()),
        }
    }
}

/// Physical boost-converter parameters (SI units) plus the control scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterParams {
    /// Source voltage.
    pub v_s: f64,
    /// Inductance.
    pub l: f64,
    /// Output capacitance.
    pub c: f64,
    /// Load resistance.
    pub r_load: f64,
    /// Parasitic inductor (and switch/diode) resistance.
    pub r: f64,
    /// Capacitor ESR. Only the switched model sees it.
    pub r_c: f64,
    /// Ramp amplitude. Volts for voltage-mode, amperes (compensation ramp) for current-mode.
    pub v_h: f64,
    /// Switching frequency.
    pub f_s: f64,
    pub scheme: ControlScheme,
}

impl ConverterParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        v_s: f64,
        l: f64,
        c: f64,
        r_load: f64,
        r: f64,
        r_c: f64,
        v_h: f64,
        f_s: f64,
        scheme: ControlScheme,
    ) -> Result<Self> {
        let p = ConverterParams { v_s, l, c, r_load, r, r_c, v_h, f_s, scheme };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_s", self.v_s),
            ("L", self.l),
            ("C", self.c),
            ("R", self.r_load),
            ("f_s", self.f_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        let non_negative = [("r", self.r), ("R_c", self.r_c), ("V_h", self.v_h)];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        if self.v_h == 0.0 && matches!(self.scheme, ControlScheme::Pvmc { .. } | ControlScheme::VmcType3 { .. }) {
            return Err(Error::InvalidParameter {
                name: "V_h",
                reason: "voltage-mode control needs a ramp amplitude > 0".into(),
            });
        }
        self.scheme.validate()
    }

    /// Clock period `T = 1/f_s`.
    pub fn period(&self) -> f64 {
        1.0 / self.f_s
    }

    /// `η = r/R`.
    pub fn eta(&self) -> f64 {
        self.r / self.r_load
    }

    /// `κ = k_p/V_h`, defined for proportional schemes with a nonzero ramp.
    pub fn kappa(&self) -> Option<f64> {
        match self.scheme.k_p() {
            Some(k_p) if self.v_h > 0.0 => Some(k_p / self.v_h),
            _ => None,
        }
    }

    /// Copy with a different parasitic resistance.
    pub fn with_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    /// Copy with a different switching frequency.
    pub fn with_f_s(mut self, f_s: f64) -> Self {
        self.f_s = f_s;
        self
    }

    /// Copy with a different control scheme.
    pub fn with_scheme(mut self, scheme: ControlScheme) -> Self {
        self.scheme = scheme;
        self
    }
}
