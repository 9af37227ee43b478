use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::{ControlError, Result, StabilizedPlant};
use crate::lds::{LinearSystem, StageCost};
use crate::oco::{BallDomain, LearnerState, OnlineLearner, Projection, StepSchedule};
use crate::peo::{build_markov, estimate_natures_y_padded, MarkovOperator, PeoContext};
use crate::policies::stack_window;

/// What a window policy reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignalKind {
    /// Recovered disturbances (full state observation).
    #[default]
    Disturbance,
    /// Estimated Nature's y (partial observation).
    NaturesY,
}

/// Which control an agent writes into its history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordMode {
    /// The control that reached the plant.
    Applied,
    /// The control the policy asked for.
    Intended,
}

/// What a failed actuator does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailureMode {
    /// The actuator's total output is 0, baseline feedback included.
    #[default]
    Actuator,
    /// Only the learned part is dropped; the baseline keeps acting.
    Learned,
}

/// Hyperparameters shared by every agent of a controller.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    /// Policy window length.
    pub m: usize,
    /// Oracle horizon.
    pub h: usize,
    /// Rounds of zero control; at least `m + h`.
    pub burn_in: usize,
    pub radius: f64,
    pub schedule: StepSchedule,
    pub projection: Projection,
    /// Starting parameters per agent; zero when absent.
    pub initial: Option<Vec<DMatrix<f64>>>,
}

impl AgentConfig {
    pub fn new(m: usize, h: usize, schedule: StepSchedule) -> Self {
        Self {
            m,
            h,
            burn_in: m + h,
            radius: 10.0,
            schedule,
            projection: Projection::Greedy,
            initial: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.h == 0 {
            return Err(ControlError::Config("m and h must be positive".into()));
        }
        if self.burn_in < self.m + self.h {
            return Err(ControlError::Config(format!(
                "burn-in {} is shorter than m + h = {}",
                self.burn_in,
                self.m + self.h
            )));
        }
        Ok(())
    }
}

/// One learning agent and its private view of the history.
#[derive(Debug, Clone)]
pub struct MagpcAgent {
    index: usize,
    learner: LearnerState,
    markov: MarkovOperator,
    signal_dim: usize,
    // newest first, at most h + 1 entries
    thetas: VecDeque<DMatrix<f64>>,
    signal: Vec<DVector<f64>>,
    nature: Vec<DVector<f64>>,
    controls: Vec<DVector<f64>>,
    prev_obs: Option<DVector<f64>>,
}

impl MagpcAgent {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn learner(&self) -> &LearnerState {
        &self.learner
    }

    /// Parameters played `lag` rounds ago.
    pub fn theta(&self, lag: usize) -> Option<&DMatrix<f64>> {
        self.thetas.get(lag)
    }

    pub fn signal(&self) -> &[DVector<f64>] {
        &self.signal
    }

    pub fn nature(&self) -> &[DVector<f64>] {
        &self.nature
    }

    pub fn controls(&self) -> &[DVector<f64>] {
        &self.controls
    }
}

/// Everything produced in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub intended: DVector<f64>,
    pub applied: DVector<f64>,
    pub recorded: DVector<f64>,
    /// Parameters each agent played this round.
    pub thetas: Vec<DMatrix<f64>>,
    /// Whether the agents learned this round.
    pub updated: bool,
    /// Each agent's oracle value at the parameters it played; empty during burn-in.
    pub oracle_values: Vec<f64>,
}

/// Window-policy controller with one online learner per agent.
///
/// `magpc` gives every input block its own agent and local oracle and records
/// applied controls; `gpc` merges all inputs into one agent that records its
/// intended controls.
#[derive(Debug, Clone)]
pub struct DacController {
    system: LinearSystem,
    // input offset/width per original agent, for failure masks
    actuators: Vec<(usize, usize)>,
    baseline: DMatrix<f64>,
    failure: FailureMode,
    agents: Vec<MagpcAgent>,
    record: RecordMode,
    kind: SignalKind,
    cfg: AgentConfig,
    t: usize,
}

impl DacController {
    pub fn magpc(plant: &StabilizedPlant, cfg: AgentConfig, kind: SignalKind) -> Result<Self> {
        Self::build(plant.closed_loop().clone(), plant, cfg, kind, RecordMode::Applied)
    }

    pub fn gpc(plant: &StabilizedPlant, cfg: AgentConfig) -> Result<Self> {
        Self::build(
            plant.closed_loop().merged(),
            plant,
            cfg,
            SignalKind::Disturbance,
            RecordMode::Intended,
        )
    }

    /// Configuration for the merged agent: per-agent starting parameters are
    /// stacked row-wise so both controllers start from the same joint policy.
    pub fn merged_config(cfg: &AgentConfig) -> AgentConfig {
        let mut merged = cfg.clone();
        if let Some(init) = &cfg.initial {
            let rows = init.iter().map(|m| m.nrows()).sum();
            let cols = init.first().map_or(0, |m| m.ncols());
            let mut stacked = DMatrix::zeros(rows, cols);
            let mut off = 0;
            for m in init {
                stacked.rows_mut(off, m.nrows()).copy_from(m);
                off += m.nrows();
            }
            merged.initial = Some(vec![stacked]);
        }
        merged
    }

    pub fn with_failure_mode(mut self, failure: FailureMode) -> Self {
        self.failure = failure;
        self
    }

    /// Override the record mode.
    pub fn with_record_mode(mut self, record: RecordMode) -> Self {
        self.record = record;
        self
    }

    fn build(
        system: LinearSystem,
        plant: &StabilizedPlant,
        cfg: AgentConfig,
        kind: SignalKind,
        record: RecordMode,
    ) -> Result<Self> {
        cfg.validate()?;
        let raw = plant.closed_loop();
        let actuators = (0..raw.agents())
            .map(|i| (raw.agent_offset(i), raw.agent_input_dim(i)))
            .collect();
        let k = system.agents();
        if let Some(init) = &cfg.initial {
            if init.len() != k {
                return Err(ControlError::Config(format!("{} initial parameters for {k} agents", init.len())));
            }
        }
        let agents = (0..k)
            .map(|i| {
                let (observation, signal_dim) = match kind {
                    SignalKind::Disturbance => (None, system.state_dim()),
                    SignalKind::NaturesY => (system.observation(i)?.cloned(), system.observation_dim(i)?),
                };
                let markov = build_markov(&system, cfg.h, observation.as_ref())?;
                let domain = BallDomain::new(cfg.radius, system.agent_input_dim(i), cfg.m * signal_dim)?;
                let start = match &cfg.initial {
                    Some(init) => {
                        if init[i].shape() != domain.shape() {
                            return Err(ControlError::Config(format!("initial parameters of agent {} have the wrong shape", i + 1)));
                        }
                        init[i].clone()
                    }
                    None => domain.zeros(),
                };
                let learner = LearnerState::starting_at(domain, cfg.schedule, start).with_projection(cfg.projection);
                Ok(MagpcAgent {
                    index: i,
                    learner,
                    markov,
                    signal_dim,
                    thetas: VecDeque::with_capacity(cfg.h + 1),
                    signal: Vec::new(),
                    nature: Vec::new(),
                    controls: Vec::new(),
                    prev_obs: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            system,
            actuators,
            baseline: plant.baseline().gain().clone(),
            failure: FailureMode::default(),
            agents,
            record,
            kind,
            cfg,
            t: 0,
        })
    }

    pub fn agents(&self) -> &[MagpcAgent] {
        &self.agents
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn failure_mode(&self) -> FailureMode {
        self.failure
    }

    pub fn record_mode(&self) -> RecordMode {
        self.record
    }

    pub fn time(&self) -> usize {
        self.t
    }

    /// One round of the protocol at the current time `t`.
    ///
    /// `observations` holds one entry per agent (or one shared entry): the
    /// state `x_t` for disturbance-based agents, `y^i_t` otherwise. `cost` is
    /// the round's cost on `(observation, learned control)`. `failed` flags
    /// actuators of the underlying plant that output 0 this round; with
    /// [`FailureMode::Actuator`] their learned slice becomes `K_i x_t` so the
    /// baseline term is cancelled, which needs state observations.
    pub fn step(
        &mut self,
        observations: &[DVector<f64>],
        cost: &dyn StageCost,
        failed: &[bool],
    ) -> Result<StepRecord> {
        let t = self.t;
        let k = self.agents.len();
        if observations.len() != 1 && observations.len() != k {
            return Err(ControlError::Dimension(format!("{} observations for {k} agents", observations.len())));
        }
        if !failed.is_empty() && failed.len() != self.actuators.len() {
            return Err(ControlError::Dimension(format!(
                "failure mask has {} entries for {} actuators",
                failed.len(),
                self.actuators.len()
            )));
        }
        let du = self.system.input_dim();

        for (i, agent) in self.agents.iter_mut().enumerate() {
            let obs = &observations[if observations.len() == 1 { 0 } else { i }];
            observe(&self.system, self.kind, agent, obs, t)?;
        }

        let playing = t >= self.cfg.burn_in;
        let mut intended = DVector::zeros(du);
        let mut thetas = Vec::with_capacity(k);
        for (i, agent) in self.agents.iter_mut().enumerate() {
            let theta = agent.learner.decision();
            if playing {
                let window = stack_window(&agent.signal, t, self.cfg.m, agent.signal_dim)?;
                let u = &theta * window;
                intended.rows_mut(self.system.agent_offset(i), u.len()).copy_from(&u);
            }
            if agent.thetas.len() == self.cfg.h + 1 {
                agent.thetas.pop_back();
            }
            agent.thetas.push_front(theta.clone());
            thetas.push(theta);
        }

        let mut applied = intended.clone();
        for (&(off, dim), &down) in self.actuators.iter().zip(failed) {
            if !down {
                continue;
            }
            match self.failure {
                FailureMode::Learned => applied.rows_mut(off, dim).fill(0.0),
                FailureMode::Actuator => {
                    if self.kind != SignalKind::Disturbance {
                        return Err(ControlError::Config("actuator failures need state observations".into()));
                    }
                    let hold = self.baseline.rows(off, dim) * &observations[0];
                    applied.rows_mut(off, dim).copy_from(&hold);
                }
            }
        }
        let recorded = match self.record {
            RecordMode::Applied => applied.clone(),
            RecordMode::Intended => intended.clone(),
        };
        for agent in &mut self.agents {
            agent.controls.push(recorded.clone());
        }

        let mut oracle_values = Vec::new();
        if playing {
            let m = self.cfg.m;
            // oracles only read shared, committed data; updates happen after all gradients
            let grads = self
                .agents
                .iter()
                .map(|agent| {
                    let window: Vec<DMatrix<f64>> = agent.thetas.iter().cloned().collect();
                    let ctx = PeoContext {
                        markov: &agent.markov,
                        cost,
                        t,
                        m,
                        nature: &agent.nature[t],
                        controls: &agent.controls,
                    };
                    let value = ctx.local_eval(agent.index, &agent.signal, &window)?;
                    Ok((ctx.local_grad(agent.index, &agent.signal, &window)?, window, value))
                })
                .collect::<Result<Vec<_>>>()?;
            for (agent, (blocks, window, value)) in self.agents.iter_mut().zip(grads) {
                agent.learner.feed(&blocks, &window)?;
                oracle_values.push(value);
            }
        }
        self.t += 1;
        Ok(StepRecord {
            t,
            intended,
            applied,
            recorded,
            thetas,
            updated: playing,
            oracle_values,
        })
    }
}

/// Extend an agent's signal and Nature's sequence with the observation at `t`.
fn observe(
    sys: &LinearSystem,
    kind: SignalKind,
    agent: &mut MagpcAgent,
    obs: &DVector<f64>,
    t: usize,
) -> Result<()> {
    if agent.nature.len() != t || agent.controls.len() != t {
        return Err(ControlError::History(format!(
            "agent {} holds {} entries at t = {t}",
            agent.index + 1,
            agent.nature.len()
        )));
    }
    match kind {
        SignalKind::Disturbance => {
            if obs.len() != sys.state_dim() {
                return Err(ControlError::Dimension("state observation has the wrong length".into()));
            }
            let nature = match (&agent.prev_obs, t) {
                (Some(prev), t) if t > 0 => {
                    let w = obs - sys.a() * prev - sys.b() * &agent.controls[t - 1];
                    let nat = sys.a() * &agent.nature[t - 1] + &w;
                    agent.signal.push(w);
                    nat
                }
                _ => obs.clone(),
            };
            agent.nature.push(nature);
        }
        SignalKind::NaturesY => {
            if obs.len() != agent.markov.output_dim() {
                return Err(ControlError::Dimension("observation has the wrong length".into()));
            }
            let est = estimate_natures_y_padded(&agent.markov, obs, &agent.controls, t);
            agent.signal.push(est.clone());
            agent.nature.push(est);
        }
    }
    agent.prev_obs = Some(obs.clone());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::stabilize_and_wrap;
    use crate::lds::{generate_disturbances, DisturbanceProfile, QuadCost};
    use crate::policies::LinearFeedback;
    use crate::systems;

    fn run(ctrl: &mut DacController, plant: &StabilizedPlant, w: &[DVector<f64>], cost: &QuadCost) -> Vec<(DVector<f64>, StepRecord)> {
        let mut x = DVector::zeros(plant.raw().state_dim());
        let mut out = Vec::new();
        for wt in w {
            let rec = ctrl.step(std::slice::from_ref(&x), cost, &[]).unwrap();
            let next = plant.step(&x, &rec.applied, wt).unwrap();
            out.push((x, rec));
            x = next;
        }
        out
    }

    #[test]
    fn burn_in_plays_zero_and_tracks_nature() {
        let sys = systems::desk_pair();
        let plant = StabilizedPlant::unwrapped(&sys).unwrap();
        let cfg = AgentConfig::new(3, 4, StepSchedule::Inverse(0.1));
        let mut ctrl = DacController::magpc(&plant, cfg, SignalKind::Disturbance).unwrap();
        let trace = generate_disturbances(&DisturbanceProfile::Gaussian, 1, 30, 2).unwrap();
        let xnat = sys.natures_x(&trace.w).unwrap();
        let cost = QuadCost::identity(2, 2);
        for (t, (x, rec)) in run(&mut ctrl, &plant, &trace.w, &cost).into_iter().enumerate() {
            if t < 7 {
                assert_eq!(rec.applied, DVector::zeros(2));
                assert_eq!(x, xnat[t]);
            }
            assert_eq!(ctrl.agents()[0].nature()[t], ctrl.agents()[1].nature()[t]);
        }
        for t in 1..30 {
            assert!((&ctrl.agents()[0].signal()[t - 1] - &trace.w[t - 1]).amax() < 1e-12);
        }
    }

    #[test]
    fn zero_learning_rate_replays_initial_policy() {
        let sys = systems::desk_pair();
        let plant = StabilizedPlant::unwrapped(&sys).unwrap();
        let init = vec![DMatrix::from_element(1, 4, 0.1), DMatrix::from_element(1, 4, -0.2)];
        let mut cfg = AgentConfig::new(2, 3, StepSchedule::Constant(0.0));
        cfg.initial = Some(init.clone());
        let mut ctrl = DacController::magpc(&plant, cfg, SignalKind::Disturbance).unwrap();
        let trace = generate_disturbances(&DisturbanceProfile::Gaussian, 5, 40, 2).unwrap();
        for (_, rec) in run(&mut ctrl, &plant, &trace.w, &QuadCost::identity(2, 2)).into_iter().skip(5) {
            let t = rec.t;
            for (i, th) in init.iter().enumerate() {
                assert_eq!(rec.thetas[i], *th);
                let u = th * stack_window(&trace.w, t, 2, 2).unwrap();
                assert!((u[0] - rec.applied[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_agent_gpc_equals_magpc() {
        let sys = systems::scalar(0.7, &[1.0]);
        let plant = StabilizedPlant::unwrapped(&sys).unwrap();
        let cfg = AgentConfig::new(3, 5, StepSchedule::Inverse(0.01));
        let trace = generate_disturbances(&DisturbanceProfile::Sinusoidal, 0, 200, 1).unwrap();
        let cost = QuadCost::identity(1, 1);
        let mut a = DacController::magpc(&plant, cfg.clone(), SignalKind::Disturbance).unwrap();
        let mut b = DacController::gpc(&plant, cfg).unwrap();
        let ra = run(&mut a, &plant, &trace.w, &cost);
        let rb = run(&mut b, &plant, &trace.w, &cost);
        for ((xa, a), (xb, b)) in ra.iter().zip(&rb) {
            assert_eq!(xa, xb);
            assert_eq!(a.applied, b.applied);
        }
    }

    #[test]
    fn failure_masks_learned_control() {
        let sys = systems::admire();
        let k = crate::controllers::lqr_synthesize(&sys, &DMatrix::identity(5, 5), &DMatrix::identity(4, 4)).unwrap();
        let plant = stabilize_and_wrap(&sys, k).unwrap();
        let mut cfg = AgentConfig::new(2, 2, StepSchedule::Constant(0.0));
        cfg.initial = Some(vec![DMatrix::from_element(1, 10, 0.05); 4]);
        let mut magpc = DacController::magpc(&plant, cfg.clone(), SignalKind::Disturbance).unwrap();
        let mut learned_only = DacController::magpc(&plant, cfg.clone(), SignalKind::Disturbance)
            .unwrap()
            .with_failure_mode(FailureMode::Learned);
        let mut gpc = DacController::gpc(&plant, DacController::merged_config(&cfg)).unwrap();
        let eff = plant.effective_cost(&QuadCost::identity(5, 4)).unwrap();
        let x = DVector::from_element(5, 0.1);
        let down = [false, false, false, true];
        for _ in 0..6 {
            let a = magpc.step(std::slice::from_ref(&x), &eff, &down).unwrap();
            let b = gpc.step(std::slice::from_ref(&x), &eff, &down).unwrap();
            let c = learned_only.step(std::slice::from_ref(&x), &eff, &down).unwrap();
            // the actuator's total output is zero
            let total = plant.total_control(&x, &a.applied).unwrap();
            assert!(total[3].abs() < 1e-15);
            assert_eq!(c.applied[3], 0.0);
            assert_eq!(a.recorded, a.applied);
            assert_eq!(b.recorded, b.intended);
        }
        assert!(LinearFeedback::stabilizing(&sys, plant.baseline().gain().clone()).is_ok());
    }
}
