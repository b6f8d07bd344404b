//! Exact multichannel Dicke superradiance.
//!
//! `N` emitters, initially all excited, decay through `d` collective
//! channels with rates `Γ_α`. The crate computes populations and emitted
//! intensities in closed form as finite sums of exponentials
//! ([`trajectory`]), steady-state ground-state distributions
//! ([`steady_state`]) and their large-`N` asymptotics ([`meanfield`]), and
//! cross-checks everything against a rate-equation integrator
//! ([`oracle_ode`]), a jump-process simulator ([`stochastic`]) and the
//! underlying cavity model ([`cavity`]).

pub mod cavity;
pub mod cli;
pub mod error;
pub mod expsum;
pub mod system;
pub mod meanfield;
pub mod oracle_ode;
pub mod steady_state;
pub mod stochastic;
pub mod trajectory;

pub use error::{Error, Result};
pub use expsum::{ExpPolySum, ExpTerm, Numerics, RateValue};
pub use system::{Lattice, OccupationState, SystemSpec};
