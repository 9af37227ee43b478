use std::thread;

use nalgebra::{DMatrix, DVector};

use super::config::{ControllerKind, ExperimentConfig, Scenario};
use super::log::{ExperimentLog, LogRow, Summary};
use super::HarnessError;
use crate::controllers::{
    hinf_synthesize, lqr_synthesize, stabilize_and_wrap, AgentConfig, DacController, SignalKind, StabilizedPlant,
};
use crate::lds::{generate_disturbances, DisturbanceTrace, LinearSystem, QuadCost, StageCost};
use crate::policies::LinearFeedback;
use crate::systems;

/// Plant of a control scenario.
pub fn scenario_system(scenario: Scenario) -> Result<LinearSystem, HarnessError> {
    match scenario {
        Scenario::Admire => Ok(systems::admire()),
        Scenario::Desk => Ok(systems::desk_pair()),
        other => Err(HarnessError::Unsupported(format!("scenario {other} has no plant"))),
    }
}

pub fn scenario_cost(cfg: &ExperimentConfig, sys: &LinearSystem) -> Result<QuadCost, HarnessError> {
    Ok(QuadCost::scaled_identity(
        sys.state_dim(),
        sys.input_dim(),
        cfg.q_scale,
        cfg.r_scale,
    )?)
}

/// Plant seen by learned controllers: LQR-wrapped when open-loop unstable.
pub fn learning_plant(cfg: &ExperimentConfig, sys: &LinearSystem) -> Result<StabilizedPlant, HarnessError> {
    if crate::lds::certify_stability(sys).is_ok() {
        return Ok(StabilizedPlant::unwrapped(sys)?);
    }
    let cost = scenario_cost(cfg, sys)?;
    let k = lqr_synthesize(sys, cost.q(), cost.r())?;
    Ok(stabilize_and_wrap(sys, k)?)
}

pub fn agent_config(cfg: &ExperimentConfig) -> AgentConfig {
    AgentConfig {
        burn_in: cfg.burn_in,
        radius: cfg.radius,
        ..AgentConfig::new(cfg.m, cfg.h, cfg.schedule())
    }
}

fn failure_mask(cfg: &ExperimentConfig, agents: usize, t: usize) -> Vec<bool> {
    let mut mask = vec![false; agents];
    if let Some((agent, start)) = cfg.failure_zero_based() {
        if t >= start {
            mask[agent] = true;
        }
    }
    mask
}

fn actuator_norms(sys: &LinearSystem, u: &DVector<f64>) -> Vec<f64> {
    (0..sys.agents()).map(|i| sys.agent_slice(u, i).norm()).collect()
}

/// Simulate one configured run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentLog, HarnessError> {
    cfg.validate()?;
    let sys = scenario_system(cfg.scenario)?;
    let trace = generate_disturbances(&cfg.profile, cfg.seed, cfg.horizon, sys.state_dim())?;
    run_with_trace(cfg, &sys, &trace)
}

/// Simulate on a given system and disturbance trace.
pub fn run_with_trace(
    cfg: &ExperimentConfig,
    sys: &LinearSystem,
    trace: &DisturbanceTrace,
) -> Result<ExperimentLog, HarnessError> {
    let cost = scenario_cost(cfg, sys)?;
    let k = sys.agents();
    let horizon = trace.horizon();
    let mut x = DVector::zeros(sys.state_dim());
    let mut log = ExperimentLog {
        config: cfg.clone(),
        rows: Vec::with_capacity(horizon),
        states: vec![x.clone()],
        learned: Vec::with_capacity(horizon),
        controls: Vec::with_capacity(horizon),
        disturbances: trace.w.clone(),
        thetas: Vec::new(),
        oracle_gap: Vec::new(),
        summary: Summary::default(),
    };
    let mut cumulative = 0.0;
    let mut push_row = |log: &mut ExperimentLog, t: usize, x: &DVector<f64>, total: &DVector<f64>, failed: bool| {
        let c = cost.eval(x, total);
        cumulative += c;
        log.rows.push(LogRow {
            t,
            cost: c,
            avg_cost: cumulative / (t + 1) as f64,
            state_norm: x.norm(),
            u_norms: actuator_norms(sys, total),
            failed,
        });
    };

    match cfg.controller {
        ControllerKind::Magpc | ControllerKind::Gpc | ControllerKind::Zero => {
            let plant = learning_plant(cfg, sys)?;
            let eff = plant.effective_cost(&cost)?;
            let acfg = agent_config(cfg);
            let mut ctrl = match cfg.controller {
                ControllerKind::Gpc => Some(DacController::gpc(&plant, acfg)?),
                ControllerKind::Magpc => Some(DacController::magpc(&plant, acfg, SignalKind::Disturbance)?),
                _ => None,
            };
            for t in 0..horizon {
                let mask = failure_mask(cfg, k, t);
                let applied = match ctrl.as_mut() {
                    Some(ctrl) => {
                        let rec = ctrl.step(std::slice::from_ref(&x), &eff, &mask)?;
                        let realized = eff.eval(&x, &rec.applied);
                        log.oracle_gap.push(
                            rec.oracle_values
                                .iter()
                                .map(|v| (v - realized).abs())
                                .reduce(f64::max),
                        );
                        log.thetas.push(rec.thetas);
                        rec.applied
                    }
                    None => {
                        // a failed actuator outputs 0, so its learned slice cancels the baseline
                        let mut u = DVector::zeros(sys.input_dim());
                        let hold = plant.baseline().gain() * &x;
                        for (i, &down) in mask.iter().enumerate() {
                            if down {
                                let (off, dim) = (sys.agent_offset(i), sys.agent_input_dim(i));
                                u.rows_mut(off, dim).copy_from(&hold.rows(off, dim));
                            }
                        }
                        u
                    }
                };
                let total = plant.total_control(&x, &applied)?;
                push_row(&mut log, t, &x, &total, mask.iter().any(|&m| m));
                let next = plant.step(&x, &applied, &trace.w[t])?;
                log.learned.push(applied);
                log.controls.push(total);
                x = next;
                log.states.push(x.clone());
            }
        }
        ControllerKind::Lqr | ControllerKind::Hinf => {
            let feedback = linear_baseline(cfg, sys, &cost)?;
            for t in 0..horizon {
                let mask = failure_mask(cfg, k, t);
                let mut total = feedback.control(&x)?;
                for (i, &down) in mask.iter().enumerate() {
                    if down {
                        total.rows_mut(sys.agent_offset(i), sys.agent_input_dim(i)).fill(0.0);
                    }
                }
                push_row(&mut log, t, &x, &total, mask.iter().any(|&m| m));
                let next = sys.step(&x, &total, &trace.w[t])?;
                log.learned.push(DVector::zeros(sys.input_dim()));
                log.controls.push(total);
                x = next;
                log.states.push(x.clone());
            }
        }
    }
    summarize(&mut log);
    Ok(log)
}

fn linear_baseline(cfg: &ExperimentConfig, sys: &LinearSystem, cost: &QuadCost) -> Result<LinearFeedback, HarnessError> {
    Ok(match cfg.controller {
        ControllerKind::Lqr => lqr_synthesize(sys, cost.q(), cost.r())?,
        _ => hinf_synthesize(sys, cost.q(), cost.r(), (1e-2, f64::INFINITY))?.feedback,
    })
}

/// Fill the summary from the rows. No wall-clock data, so equal configs give equal files.
pub fn summarize(log: &mut ExperimentLog) {
    let cfg = log.config.clone();
    let horizon = log.horizon();
    let total = log.total_cost();
    let mut s = std::mem::take(&mut log.summary);
    s.set("scenario", cfg.scenario);
    s.set("controller", cfg.controller);
    s.set("seed", cfg.seed);
    s.set("T", horizon);
    s.set("config_hash", cfg.hash());
    s.set("total_cost", total);
    s.set("average_cost", total / horizon.max(1) as f64);
    s.set("max_state_norm", log.max_state_norm(0, horizon));
    if let Some((agent, start)) = cfg.failure {
        s.set("failure_agent", agent);
        s.set("failure_t", start);
        s.set("pre_failure_max_state_norm", log.max_state_norm(0, start));
        s.set("post_failure_max_state_norm", log.max_state_norm(start, horizon));
        s.set("post_failure_cost", log.cost_between(start, horizon));
    }
    let eps = log.oracle_gap.iter().flatten().copied().reduce(f64::max);
    if let Some(eps) = eps {
        let pre: Option<f64> = match cfg.failure {
            Some((_, start)) => log.oracle_gap[..start.min(horizon)].iter().flatten().copied().reduce(f64::max),
            None => Some(eps),
        };
        s.set("measured_epsilon", pre.unwrap_or(0.0));
        s.set("max_oracle_gap", eps);
    }
    log.summary = s;
}

/// Run `replicas` copies with seeds `seed, seed + 1, …` on scoped threads.
pub fn run_replicas(cfg: &ExperimentConfig, replicas: usize) -> Vec<Result<ExperimentLog, HarnessError>> {
    thread::scope(|scope| {
        let handles: Vec<_> = (0..replicas as u64)
            .map(|offset| {
                let cfg = ExperimentConfig {
                    seed: cfg.seed.wrapping_add(offset),
                    ..cfg.clone()
                };
                scope.spawn(move || run_experiment(&cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(HarnessError::Unsupported("replica panicked".into()))))
            .collect()
    })
}

/// Per-agent parameter shapes of a scenario's learned controllers.
pub fn parameter_shapes(sys: &LinearSystem, m: usize) -> Vec<(usize, usize)> {
    (0..sys.agents())
        .map(|i| (sys.agent_input_dim(i), m * sys.state_dim()))
        .collect()
}

/// Zero parameters for every agent.
pub fn zero_parameters(sys: &LinearSystem, m: usize) -> Vec<DMatrix<f64>> {
    parameter_shapes(sys, m)
        .into_iter()
        .map(|(r, c)| DMatrix::zeros(r, c))
        .collect()
}
