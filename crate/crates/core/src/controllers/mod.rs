//! Online and linear controllers: multi-agent and single-agent gradient
//! perturbation controllers, LQR and H∞ baselines, and the stabilizing wrap
//! for open-loop unstable plants.

mod magpc;
mod plant;
mod riccati;

pub use magpc::{AgentConfig, DacController, FailureMode, MagpcAgent, RecordMode, SignalKind, StepRecord};
pub use plant::{stabilize_and_wrap, StabilizedPlant};
pub use riccati::{game_riccati, hinf_synthesize, lqr_riccati, lqr_synthesize, HinfSolution, RiccatiSolution};

use thiserror::Error;

use crate::lds::LdsError;
use crate::oco::OcoError;
use crate::peo::PeoError;
use crate::policies::PolicyError;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("Riccati iteration did not converge in {iterations} steps")]
    NotStabilizable { iterations: usize },
    #[error("gain is not stabilizing (closed-loop spectral radius {0})")]
    NotStabilizing(f64),
    #[error("no feasible attenuation level in [{lo}, {hi}]")]
    Infeasible { lo: f64, hi: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("inconsistent histories: {0}")]
    History(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Lds(#[from] LdsError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Peo(#[from] PeoError),
    #[error(transparent)]
    Oco(#[from] OcoError),
}

pub type Result<T, E = ControlError> = std::result::Result<T, E>;
