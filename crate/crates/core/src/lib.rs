//! Regret-minimizing multi-agent control of linear dynamical systems under
//! adversarial disturbances.

pub mod lds;
pub mod oco;
pub mod systems;
pub mod policies;
pub mod peo;
pub mod controllers;
pub mod harness;
pub mod cli;
