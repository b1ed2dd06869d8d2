use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operation requires the {expected} scheme, got `{got}`")]
    WrongScheme { expected: &'static str, got: &'static str },

    #[error("duty ratio {0} outside the admissible range")]
    DutyOutOfRange(f64),

    #[error("averaged steady state is singular (η = 0 and D = 1)")]
    DegenerateSteadyState,

    #[error("no saddle-node bifurcation: {0}")]
    NoSaddleNode(&'static str),

    #[error("DC saturated solution does not exist when r = 0 (needs i_L = v_s/r = ∞)")]
    NoDcSolution,

    #[error("resolvent (sI - A) is singular at s = {0}")]
    SingularResolvent(num_complex::Complex64),

    #[error("state dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("switching instant within the grazing zone of a clock edge (cycle {cycle}, t* = {t_switch:e})")]
    Grazing { cycle: usize, t_switch: f64 },

    #[error("no bifurcation bracket on branch {branch} for {kind}")]
    NoBracket { branch: usize, kind: &'static str },

    #[error("non-finite state encountered")]
    NonFinite,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
