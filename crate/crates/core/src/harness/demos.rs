//! Two small games: a multiplayer OCO counterexample and the shared-controls lower bound.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::oco::{
    minimize_projected, multiplayer_oco_round, BallDomain, LearnerState, OnlineLearner, ProductDomain, Projection,
    ScriptedLearner, StepSchedule,
};

/// `ℓ(x¹, x²) = (x¹ − x²)² + 0.1 ‖(x¹, x²)‖²`, shared by both players.
pub fn coupling_loss(x1: f64, x2: f64) -> f64 {
    (x1 - x2).powi(2) + 0.1 * (x1 * x1 + x2 * x2)
}

/// `(∂ℓ/∂x¹, ∂ℓ/∂x²)`.
pub fn coupling_grad(x1: f64, x2: f64) -> (f64, f64) {
    (2.0 * (x1 - x2) + 0.2 * x1, -2.0 * (x1 - x2) + 0.2 * x2)
}

/// Outcome of one pair of learners on the coupling game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameRun {
    pub plays: Vec<(f64, f64)>,
    /// `ℓ(x_t)` per round.
    pub joint_losses: Vec<f64>,
    /// Per player, `min_z (1/T) Σ_t ℓ(z, x^{-i}_t)`.
    pub best_response_loss: [f64; 2],
    /// Per player, average loss minus its best fixed response.
    pub player_regret: [f64; 2],
    /// Average joint loss minus the best fixed joint decision's average loss.
    pub multi_agent_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcoDemoReport {
    pub horizon: usize,
    pub scripted: GameRun,
    pub ogd: GameRun,
}

impl OcoDemoReport {
    /// `t,scripted_joint_loss,ogd_joint_loss` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,scripted_joint_loss,ogd_joint_loss\n");
        for (t, (a, b)) in self.scripted.joint_losses.iter().zip(&self.ogd.joint_losses).enumerate() {
            let _ = writeln!(s, "{t},{a},{b}");
        }
        s
    }
}

fn best_fixed(f: impl Fn(&DVector<f64>) -> f64, g: impl Fn(&DVector<f64>) -> DVector<f64>, dim: usize) -> f64 {
    let domain = ProductDomain::new(vec![BallDomain::vector(1.0, 1).expect("unit ball"); dim]);
    minimize_projected(&f, &g, &domain, DVector::zeros(dim), 10_000, 1e-14).value
}

fn score(plays: Vec<(f64, f64)>) -> GameRun {
    let n = plays.len() as f64;
    let joint_losses: Vec<f64> = plays.iter().map(|&(a, b)| coupling_loss(a, b)).collect();
    let avg = joint_losses.iter().sum::<f64>() / n;
    let others = [
        plays.iter().map(|p| p.1).collect::<Vec<_>>(),
        plays.iter().map(|p| p.0).collect::<Vec<_>>(),
    ];
    let best_response_loss = [0, 1].map(|i| {
        let other = &others[i];
        // symmetric loss, so player order inside ℓ does not matter
        best_fixed(
            |z| other.iter().map(|&o| coupling_loss(z[0], o)).sum::<f64>() / n,
            |z| DVector::from_element(1, other.iter().map(|&o| coupling_grad(z[0], o).0).sum::<f64>() / n),
            1,
        )
    });
    let joint_best = best_fixed(
        |z| coupling_loss(z[0], z[1]),
        |z| {
            let (a, b) = coupling_grad(z[0], z[1]);
            DVector::from_vec(vec![a, b])
        },
        2,
    );
    GameRun {
        plays,
        joint_losses,
        best_response_loss,
        player_regret: best_response_loss.map(|b| avg - b),
        multi_agent_regret: avg - joint_best,
    }
}

fn play<L: OnlineLearner>(learners: &mut [L; 2], horizon: usize) -> Vec<(f64, f64)> {
    (0..horizon)
        .map(|_| {
            let joint = multiplayer_oco_round(learners, |j| {
                let (a, b) = (j.parts[0][0], j.parts[1][0]);
                let (ga, gb) = coupling_grad(a, b);
                vec![DMatrix::from_element(1, 1, ga), DMatrix::from_element(1, 1, gb)]
            })
            .expect("scalar game rounds are well formed");
            (joint.parts[0][0], joint.parts[1][0])
        })
        .collect()
}

/// Scripted players that both alternate `+1, −1` against OGD players on the
/// linearized losses (unit balls, `η_t = 1/√t`, started at `(1, −1)`).
pub fn demo_oco_counterexample(horizon: usize) -> OcoDemoReport {
    let mut scripted = [ScriptedLearner::alternating(1.0), ScriptedLearner::alternating(1.0)];
    let dom = BallDomain::vector(1.0, 1).expect("unit ball");
    let ogd_player = |start: f64| {
        LearnerState::starting_at(dom, StepSchedule::InverseSqrt(1.0), DMatrix::from_element(1, 1, start))
            .with_projection(Projection::Greedy)
    };
    let mut ogd = [ogd_player(1.0), ogd_player(-1.0)];
    OcoDemoReport {
        horizon,
        scripted: score(play(&mut scripted, horizon)),
        ogd: score(play(&mut ogd, horizon)),
    }
}

/// Deterministic choice of `u¹_t` from agent 1's observations.
pub trait Strategy {
    fn name(&self) -> String;

    /// `observed_costs[s]` and `own_history[s]` for `s < t`.
    fn act(&mut self, observed_costs: &[f64], own_history: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantStrategy(pub f64);

impl Strategy for ConstantStrategy {
    fn name(&self) -> String {
        format!("constant-{}", self.0)
    }

    fn act(&mut self, _: &[f64], _: &[f64]) -> f64 {
        self.0
    }
}

/// OGD on the surrogate `(z − c_t/2)²` built from the only signal agent 1 sees.
#[derive(Debug, Clone, PartialEq)]
pub struct OgdStrategy {
    learner: LearnerState,
}

impl OgdStrategy {
    pub fn new(start: f64) -> Self {
        let dom = BallDomain::vector(0.5, 1).expect("half ball");
        // the ball is centred at 0, so work in z − 1/2
        let learner = LearnerState::starting_at(dom, StepSchedule::InverseSqrt(0.5), DMatrix::from_element(1, 1, start - 0.5))
            .with_projection(Projection::Greedy);
        Self { learner }
    }
}

impl Default for OgdStrategy {
    fn default() -> Self {
        Self::new(0.0)
    }
}

impl Strategy for OgdStrategy {
    fn name(&self) -> String {
        "ogd".into()
    }

    fn act(&mut self, observed_costs: &[f64], _: &[f64]) -> f64 {
        if let Some(&c) = observed_costs.last() {
            let z = self.learner.iterate()[0] + 0.5;
            let g = DMatrix::from_element(1, 1, 2.0 * (z - c / 2.0));
            let x = self.learner.decision();
            self.learner
                .feed(std::slice::from_ref(&g), std::slice::from_ref(&x))
                .expect("scalar gradient");
        }
        self.learner.iterate()[0] + 0.5
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharedControlsReport {
    pub strategy: String,
    pub horizon: usize,
    /// `u¹_t`, identical on both trajectories.
    pub controls: Vec<f64>,
    /// Average regret on the trajectory with `u² ≡ v`, for `v = 0, 1`.
    pub regrets: [f64; 2],
    pub max_regret: f64,
    pub clamped: usize,
}

impl SharedControlsReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,u1,cost,u3_traj0,u3_traj1\n");
        for (t, &u) in self.controls.iter().enumerate() {
            let _ = writeln!(s, "{t},{u},1,{},{}", third_control(u, 0.0), third_control(u, 1.0));
        }
        s
    }
}

/// `u³ = √(1 − (u¹ − u²)²)`, which pins `(u¹ − u²)² + (u³)²` at 1.
pub fn third_control(u1: f64, u2: f64) -> f64 {
    (1.0 - (u1 - u2).powi(2)).max(0.0).sqrt()
}

/// Replay `strategy` against the two adversarial trajectories `u² ≡ 0` and `u² ≡ 1`.
///
/// The third agent keeps every observed cost at 1, so agent 1 sees the same
/// data on both and plays the same sequence.
pub fn demo_shared_controls(strategy: &mut dyn Strategy, horizon: usize) -> SharedControlsReport {
    let mut costs = Vec::with_capacity(horizon);
    let mut controls = Vec::with_capacity(horizon);
    let mut clamped = 0;
    for _ in 0..horizon {
        let raw = strategy.act(&costs, &controls);
        let u = if raw.is_nan() { 0.0 } else { raw.clamp(0.0, 1.0) };
        if u != raw {
            log::warn!("strategy {} played {raw}, clamped to {u}", strategy.name());
            clamped += 1;
        }
        // both trajectories give (u¹ − u²)² + (u³)² = 1
        let v = 0.0;
        costs.push((u - v).powi(2) + third_control(u, v).powi(2));
        controls.push(u);
    }
    let n = horizon.max(1) as f64;
    // best constant in [0, 1] is c = v, which costs nothing
    let regrets = [0.0, 1.0].map(|v: f64| controls.iter().map(|u| (u - v).powi(2)).sum::<f64>() / n);
    SharedControlsReport {
        strategy: strategy.name(),
        horizon,
        controls,
        regrets,
        max_regret: regrets[0].max(regrets[1]),
        clamped,
    }
}
