//! Simulation and analysis of hybrid AC–DC multi-feeder hubs whose feeders
//! are steered by series voltage-injection modules.
//!
//! The crate is organised bottom-up: phasor algebra and AC power flow,
//! series-module controllers, DC plant models, linear stability analysis,
//! hub power accounting, and a time-domain scenario engine that ties them
//! together.

pub mod control;
pub mod dc;
pub mod error;
pub mod hub;
pub mod network;
pub mod phasor;
pub mod powerflow;
pub mod sim;
pub mod small_signal;

pub use error::{Error, Result};
pub use phasor::{Impedance, Phasor};
pub use powerflow::{DqInjection, PowerPair};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ac-feeders.md")]
    mod ac_feeders {}
    #[doc = include_str!("../../../book/src/dc-feeders.md")]
    mod dc_feeders {}
    #[doc = include_str!("../../../book/src/stability.md")]
    mod stability {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
