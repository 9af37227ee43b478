//! Scenario presets, simulation runs, metrics and result files.

mod config;
mod demos;
mod experiment;
mod log;
mod regret;

use thiserror::Error;

pub use config::{
    parse_config, parse_config_with, ConfigError, ControllerKind, ExperimentConfig, LrSchedule, Scenario, CONFIG_KEYS,
    DEFAULT_FAILURE_T,
};
pub use demos::{
    coupling_grad, coupling_loss, demo_oco_counterexample, demo_shared_controls, third_control, ConstantStrategy,
    GameRun, OcoDemoReport, OgdStrategy, SharedControlsReport, Strategy,
};
pub use experiment::{
    agent_config, learning_plant, parameter_shapes, run_experiment, run_replicas, run_with_trace, scenario_cost,
    scenario_system, summarize, zero_parameters,
};
pub use log::{ExperimentLog, LogRow, Summary};
pub use regret::{
    annotate_summary, build_objective, decompose, measure_regret_terms, rollout, ComparatorSolution,
    OfflineComparator, QuadraticObjective, RegretTerms,
};

use crate::controllers::ControlError;
use crate::lds::LdsError;
use crate::oco::OcoError;
use crate::peo::PeoError;
use crate::policies::PolicyError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Lds(#[from] LdsError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Peo(#[from] PeoError),
    #[error(transparent)]
    Oco(#[from] OcoError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Unsupported(String),
}
