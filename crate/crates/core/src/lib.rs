//! Saddle-node, Hopf and period-doubling analysis of PWM boost converters with
//! parasitic inductor resistance.
//!
//! Two routes to the same critical points are provided: closed-form results on
//! the state-space-averaged model ([`averaged`]) and an exact cycle-by-cycle
//! switched model ([`model`], [`sim`]) whose periodic orbits and Floquet
//! multipliers ([`orbit`]) drive bifurcation diagrams ([`scan`]).

pub mod averaged;
pub mod compensator;
pub mod error;
pub mod model;
pub mod orbit;
pub mod params;
pub mod scan;
pub mod sim;

pub use error::{Error, Result};
pub use model::{RampSpec, Stage, SwitchedModel};
pub use params::{ControlScheme, ConverterParams};
