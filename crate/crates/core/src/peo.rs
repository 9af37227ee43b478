//! Policy-evaluation oracles built on truncated Markov operators.
//!
//! At time `t` the oracle estimates the cost the plant would have paid had the
//! last `h` controls (and the current one) been generated by candidate
//! window policies:
//!
//! ```text
//! x̃_t = x^nat_t + Σ_{r=1}^{h} G_{r−1} ũ_{t−r},   cost = c_t(x̃_t, ũ_t)
//! ```
//!
//! where `G_r = C A^r B`. Parameter windows are indexed by lag: `thetas[0]`
//! generates `ũ_t` and `thetas[r]` generates `ũ_{t−r}`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::lds::{LdsError, LinearSystem, StageCost};
use crate::policies::{stack_window, PolicyError};

#[derive(Debug, Error)]
pub enum PeoError {
    #[error("oracle horizon must be at least 1")]
    ZeroHorizon,
    #[error("oracle at t = {t} needs t ≥ {burn_in}")]
    BurnIn { t: usize, burn_in: usize },
    #[error("parameter window has {got} entries, expected {expected}")]
    WindowLength { got: usize, expected: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("history too short: {0}")]
    History(String),
    #[error(transparent)]
    Lds(#[from] LdsError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

pub type Result<T, E = PeoError> = std::result::Result<T, E>;

/// Blocks `G_r = C A^r B` for `r < h`, with per-agent column views.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovOperator {
    blocks: Vec<DMatrix<f64>>,
    offsets: Vec<usize>,
    dims: Vec<usize>,
}

pub fn build_markov(sys: &LinearSystem, h: usize, observation: Option<&DMatrix<f64>>) -> Result<MarkovOperator> {
    if h == 0 {
        return Err(PeoError::ZeroHorizon);
    }
    if let Some(c) = observation {
        if c.ncols() != sys.state_dim() {
            return Err(PeoError::Dimension("observation matrix has the wrong width".into()));
        }
    }
    let mut blocks = Vec::with_capacity(h);
    let mut power_b = sys.b().clone();
    for _ in 0..h {
        blocks.push(match observation {
            Some(c) => c * &power_b,
            None => power_b.clone(),
        });
        power_b = sys.a() * power_b;
    }
    Ok(MarkovOperator {
        blocks,
        offsets: (0..sys.agents()).map(|i| sys.agent_offset(i)).collect(),
        dims: (0..sys.agents()).map(|i| sys.agent_input_dim(i)).collect(),
    })
}

impl MarkovOperator {
    pub fn horizon(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn agents(&self) -> usize {
        self.dims.len()
    }

    pub fn output_dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.blocks[0].ncols()
    }

    pub fn agent_dim(&self, agent: usize) -> usize {
        self.dims[agent]
    }

    pub fn agent_offset(&self, agent: usize) -> usize {
        self.offsets[agent]
    }

    /// Agent `i`'s columns of block `r`.
    pub fn agent_block(&self, r: usize, agent: usize) -> DMatrix<f64> {
        self.blocks[r]
            .columns(self.offsets[agent], self.dims[agent])
            .into_owned()
    }

    /// `Σ_r G_r u_r` for a lag-ordered joint window `u_0 = u_{t−1}, u_1 = u_{t−2}, …`.
    pub fn apply(&self, window: &[DVector<f64>]) -> DVector<f64> {
        window
            .iter()
            .zip(&self.blocks)
            .fold(DVector::zeros(self.output_dim()), |acc, (u, g)| acc + g * u)
    }

    /// `Σ_r G^i_r u^i_r` for one agent's window.
    pub fn apply_agent(&self, agent: usize, window: &[DVector<f64>]) -> DVector<f64> {
        window
            .iter()
            .enumerate()
            .take(self.horizon())
            .fold(DVector::zeros(self.output_dim()), |acc, (r, u)| acc + self.agent_block(r, agent) * u)
    }
}

/// `w_t = x_{t+1} − A x_t − B u_t`.
pub fn recover_disturbance(
    sys: &LinearSystem,
    x: &DVector<f64>,
    u: &DVector<f64>,
    x_next: &DVector<f64>,
) -> Result<DVector<f64>> {
    if x_next.len() != sys.state_dim() {
        return Err(PeoError::Dimension("next state has the wrong length".into()));
    }
    let predicted = sys.step(x, u, &DVector::zeros(sys.state_dim()))?;
    Ok(x_next - predicted)
}

/// `ŷ^nat_t = y_t − Σ_{r=1}^{h} G_{r−1} u_{t−r}` using all agents' controls.
///
/// `controls[s]` is the joint control at time `s`; needs `t ≥ h`.
pub fn estimate_natures_y(
    markov: &MarkovOperator,
    y_t: &DVector<f64>,
    controls: &[DVector<f64>],
    t: usize,
) -> Result<DVector<f64>> {
    let h = markov.horizon();
    if t < h || controls.len() < t {
        return Err(PeoError::History(format!(
            "need {h} past controls before t = {t}, have {}",
            controls.len().min(t)
        )));
    }
    Ok(estimate_natures_y_padded(markov, y_t, controls, t))
}

/// As [`estimate_natures_y`], treating controls before time 0 as zero.
pub fn estimate_natures_y_padded(
    markov: &MarkovOperator,
    y_t: &DVector<f64>,
    controls: &[DVector<f64>],
    t: usize,
) -> DVector<f64> {
    let window: Vec<DVector<f64>> = (1..=markov.horizon().min(t))
        .map(|r| controls[t - r].clone())
        .collect();
    y_t - markov.apply(&window)
}

/// `⌈ln T / ln(1/ρ)⌉`, the horizon giving truncation error of order `1/T`.
pub fn default_horizon(horizon: usize, rho: f64) -> usize {
    if rho <= 0.0 {
        return 1;
    }
    let rho = rho.min(1.0 - 1e-12);
    ((horizon.max(2) as f64).ln() / (1.0 / rho).ln()).ceil().max(1.0) as usize
}

/// Everything an agent knows at the end of round `t`.
#[derive(Clone, Copy)]
pub struct PeoContext<'a> {
    pub markov: &'a MarkovOperator,
    pub cost: &'a dyn StageCost,
    pub t: usize,
    /// Policy window length.
    pub m: usize,
    /// `x^nat_t`, or the Nature's-y estimate for observation-based oracles.
    pub nature: &'a DVector<f64>,
    /// Recorded joint controls; `controls[s]` for `s ≤ t`.
    pub controls: &'a [DVector<f64>],
}

/// One agent's candidate: its signal history and lag-ordered parameter window.
#[derive(Clone, Copy)]
pub struct Candidate<'a> {
    pub agent: usize,
    pub signal: &'a [DVector<f64>],
    pub thetas: &'a [DMatrix<f64>],
}

struct Counterfactual {
    state: DVector<f64>,
    control: DVector<f64>,
    // windows[c][r]: policy input of candidate c at lag r
    windows: Vec<Vec<DVector<f64>>>,
}

impl<'a> PeoContext<'a> {
    pub fn burn_in(&self) -> usize {
        self.m + self.markov.horizon()
    }

    fn check(&self, candidates: &[Candidate<'_>]) -> Result<()> {
        let h = self.markov.horizon();
        if self.t < self.burn_in() {
            return Err(PeoError::BurnIn {
                t: self.t,
                burn_in: self.burn_in(),
            });
        }
        if self.controls.len() <= self.t {
            return Err(PeoError::History(format!(
                "controls recorded up to {} but t = {}",
                self.controls.len() as isize - 1,
                self.t
            )));
        }
        if self.nature.len() != self.markov.output_dim() {
            return Err(PeoError::Dimension("nature vector does not match the operator".into()));
        }
        for c in candidates {
            if c.agent >= self.markov.agents() {
                return Err(LdsError::AgentIndex {
                    index: c.agent,
                    agents: self.markov.agents(),
                }
                .into());
            }
            if c.thetas.len() != h + 1 {
                return Err(PeoError::WindowLength {
                    got: c.thetas.len(),
                    expected: h + 1,
                });
            }
            let du = self.markov.agent_dim(c.agent);
            if c.thetas.iter().any(|th| th.nrows() != du || th.ncols() % self.m != 0) {
                return Err(PeoError::Dimension(format!(
                    "agent {} parameters must have {du} rows and a multiple of {} columns",
                    c.agent + 1,
                    self.m
                )));
            }
        }
        Ok(())
    }

    fn counterfactual(&self, candidates: &[Candidate<'_>]) -> Result<Counterfactual> {
        self.check(candidates)?;
        let h = self.markov.horizon();
        let mut windows = Vec::with_capacity(candidates.len());
        let mut joint: Vec<DVector<f64>> = (0..=h).map(|r| self.controls[self.t - r].clone()).collect();
        for c in candidates {
            let dim = c.thetas[0].ncols() / self.m;
            let off = self.markov.agent_offset(c.agent);
            let mut per_lag = Vec::with_capacity(h + 1);
            for r in 0..=h {
                let win = stack_window(c.signal, self.t - r, self.m, dim)?;
                let u = &c.thetas[r] * &win;
                joint[r].rows_mut(off, u.len()).copy_from(&u);
                per_lag.push(win);
            }
            windows.push(per_lag);
        }
        let state = self.nature + self.markov.apply(&joint[1..]);
        Ok(Counterfactual {
            state,
            control: joint.swap_remove(0),
            windows,
        })
    }

    /// Counterfactual `(x̃_t, ũ_t)` with the given candidates replaced.
    pub fn counterfactual_point(&self, candidates: &[Candidate<'_>]) -> Result<(DVector<f64>, DVector<f64>)> {
        let cf = self.counterfactual(candidates)?;
        Ok((cf.state, cf.control))
    }

    /// Cost with any set of agents regenerated from their parameter windows.
    pub fn eval_candidates(&self, candidates: &[Candidate<'_>]) -> Result<f64> {
        let cf = self.counterfactual(candidates)?;
        Ok(self.cost.eval(&cf.state, &cf.control))
    }

    /// Gradient blocks for each candidate, lag-ordered like its `thetas`.
    pub fn grad_candidates(&self, candidates: &[Candidate<'_>]) -> Result<Vec<Vec<DMatrix<f64>>>> {
        let cf = self.counterfactual(candidates)?;
        let (gx, gu) = self.cost.grad(&cf.state, &cf.control);
        let h = self.markov.horizon();
        Ok(candidates
            .iter()
            .zip(&cf.windows)
            .map(|(c, wins)| {
                let off = self.markov.agent_offset(c.agent);
                let du = self.markov.agent_dim(c.agent);
                (0..=h)
                    .map(|r| {
                        let v = if r == 0 {
                            gu.rows(off, du).into_owned()
                        } else {
                            self.markov.agent_block(r - 1, c.agent).tr_mul(&gx)
                        };
                        v * wins[r].transpose()
                    })
                    .collect()
            })
            .collect())
    }

    /// Local oracle: agent `i` regenerated, every other agent's recorded controls fixed.
    pub fn local_eval(&self, agent: usize, signal: &[DVector<f64>], thetas: &[DMatrix<f64>]) -> Result<f64> {
        self.eval_candidates(&[Candidate { agent, signal, thetas }])
    }

    pub fn local_grad(&self, agent: usize, signal: &[DVector<f64>], thetas: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        Ok(self
            .grad_candidates(&[Candidate { agent, signal, thetas }])?
            .swap_remove(0))
    }

    /// Joint oracle: every agent regenerated.
    pub fn joint_eval(&self, signals: &[&[DVector<f64>]], thetas: &[Vec<DMatrix<f64>>]) -> Result<f64> {
        self.eval_candidates(&self.all_candidates(signals, thetas)?)
    }

    pub fn joint_grad(&self, signals: &[&[DVector<f64>]], thetas: &[Vec<DMatrix<f64>>]) -> Result<Vec<Vec<DMatrix<f64>>>> {
        self.grad_candidates(&self.all_candidates(signals, thetas)?)
    }

    fn all_candidates<'b>(
        &self,
        signals: &[&'b [DVector<f64>]],
        thetas: &'b [Vec<DMatrix<f64>>],
    ) -> Result<Vec<Candidate<'b>>> {
        let k = self.markov.agents();
        if signals.len() != k || thetas.len() != k {
            return Err(PeoError::Dimension(format!(
                "joint oracle needs {k} agents, got {} signals and {} windows",
                signals.len(),
                thetas.len()
            )));
        }
        Ok((0..k)
            .map(|agent| Candidate {
                agent,
                signal: signals[agent],
                thetas: &thetas[agent],
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lds::{NormalSampler, QuadCost};
    use crate::systems;

    #[test]
    fn markov_cases() {
        let sys = LinearSystem::new(DMatrix::zeros(2, 2), vec![DMatrix::from_row_slice(2, 1, &[1.0, 2.0])]).unwrap();
        let g = build_markov(&sys, 3, None).unwrap();
        assert_eq!(g.blocks()[0], *sys.b());
        assert!(g.blocks()[1..].iter().all(|b| b.iter().all(|&v| v == 0.0)));

        let s = systems::scalar(0.5, &[2.0]);
        let g = build_markov(&s, 3, None).unwrap();
        let vals: Vec<f64> = g.blocks().iter().map(|b| b[(0, 0)]).collect();
        assert_eq!(vals, vec![2.0, 1.0, 0.5]);

        let adm = systems::admire();
        assert_eq!(build_markov(&adm, 1, None).unwrap().blocks()[0], *adm.b());
        assert!(matches!(build_markov(&adm, 0, None), Err(PeoError::ZeroHorizon)));
    }

    #[test]
    fn agent_views_sum_to_joint() {
        let mut rng = NormalSampler::new(4);
        let sys = LinearSystem::new(rng.matrix(3, 3) * 0.3, vec![rng.matrix(3, 1), rng.matrix(3, 2)]).unwrap();
        let g = build_markov(&sys, 4, None).unwrap();
        let window: Vec<_> = (0..4).map(|_| rng.vector(3)).collect();
        let parts: DVector<f64> = (0..2)
            .map(|i| {
                let w: Vec<_> = window.iter().map(|u| sys.agent_slice(u, i)).collect();
                g.apply_agent(i, &w)
            })
            .fold(DVector::zeros(3), |a, b| a + b);
        assert!((parts - g.apply(&window)).amax() < 1e-12);
    }

    #[test]
    fn recovery_cases() {
        let mut rng = NormalSampler::new(6);
        let sys = LinearSystem::new(rng.matrix(3, 3) * 0.4, vec![rng.matrix(3, 2)]).unwrap();
        let x = rng.vector(3);
        let u = rng.vector(2);
        let clean = sys.step(&x, &u, &DVector::zeros(3)).unwrap();
        assert!(recover_disturbance(&sys, &x, &u, &clean).unwrap().amax() < 1e-15);
        for _ in 0..20 {
            let w = rng.vector(3);
            let next = sys.step(&x, &u, &w).unwrap();
            assert!((recover_disturbance(&sys, &x, &u, &next).unwrap() - w).amax() <= 1e-10);
        }
        let zero = LinearSystem::new(DMatrix::zeros(2, 2), vec![DMatrix::identity(2, 1)]).unwrap();
        let xn = DVector::from_vec(vec![0.3, 0.7]);
        assert_eq!(recover_disturbance(&zero, &rng.vector(2), &DVector::zeros(1), &xn).unwrap(), xn);
    }

    #[test]
    fn natures_y_estimate() {
        let sys = systems::scalar(0.3, &[1.0]);
        let g = build_markov(&sys, 30, None).unwrap();
        let mut rng = NormalSampler::new(10);
        let w: Vec<_> = (0..60).map(|_| rng.vector(1)).collect();
        let u: Vec<_> = (0..60).map(|_| rng.vector(1)).collect();
        let mut x = DVector::zeros(1);
        let xnat = sys.natures_x(&w).unwrap();
        for t in 0..60 {
            if t >= 30 {
                let est = estimate_natures_y(&g, &x, &u, t).unwrap();
                assert!((est - &xnat[t]).amax() < 1e-8);
            }
            x = sys.step(&x, &u[t], &w[t]).unwrap();
        }
        let quiet = vec![DVector::zeros(1); 40];
        let y = DVector::from_element(1, 0.9);
        assert_eq!(estimate_natures_y(&g, &y, &quiet, 35).unwrap(), y);
        assert!(estimate_natures_y(&g, &y, &quiet, 10).is_err());

        let zero = systems::scalar(0.0, &[1.0]);
        let g1 = build_markov(&zero, 1, None).unwrap();
        let mut x = DVector::zeros(1);
        let xnat = zero.natures_x(&w).unwrap();
        for t in 0..10 {
            if t >= 1 {
                assert!((estimate_natures_y(&g1, &x, &u, t).unwrap() - &xnat[t]).amax() < 1e-15);
            }
            x = zero.step(&x, &u[t], &w[t]).unwrap();
        }
    }

    #[test]
    fn horizon_rule() {
        assert_eq!(default_horizon(1000, 0.5), 10);
        assert_eq!(default_horizon(100, 0.0), 1);
    }

    #[test]
    fn burn_in_and_window_errors() {
        let sys = systems::scalar(0.5, &[1.0]);
        let g = build_markov(&sys, 2, None).unwrap();
        let cost = QuadCost::identity(1, 1);
        let controls = vec![DVector::zeros(1); 10];
        let nature = DVector::zeros(1);
        let ctx = PeoContext { markov: &g, cost: &cost, t: 4, m: 3, nature: &nature, controls: &controls };
        let th = vec![DMatrix::zeros(1, 3); 3];
        assert!(matches!(ctx.local_eval(0, &controls, &th), Err(PeoError::BurnIn { t: 4, burn_in: 5 })));
        let ctx = PeoContext { t: 6, ..ctx };
        assert!(matches!(
            ctx.local_eval(0, &controls, &th[..2]),
            Err(PeoError::WindowLength { got: 2, expected: 3 })
        ));
        assert_eq!(ctx.local_eval(0, &controls, &th).unwrap(), 0.0);
    }

    #[test]
    fn constant_cost_has_zero_gradient() {
        struct Flat;
        impl StageCost for Flat {
            fn eval(&self, _: &DVector<f64>, _: &DVector<f64>) -> f64 {
                3.0
            }
        }
        let sys = systems::scalar(0.5, &[1.0]);
        let g = build_markov(&sys, 2, None).unwrap();
        let mut rng = NormalSampler::new(1);
        let controls: Vec<_> = (0..10).map(|_| rng.vector(1)).collect();
        let signal: Vec<_> = (0..10).map(|_| rng.vector(1)).collect();
        let nature = rng.vector(1);
        let ctx = PeoContext { markov: &g, cost: &Flat, t: 8, m: 2, nature: &nature, controls: &controls };
        let th: Vec<_> = (0..3).map(|_| rng.matrix(1, 2)).collect();
        for blk in ctx.local_grad(0, &signal, &th).unwrap() {
            assert!(blk.amax() < 1e-6);
        }
    }
}
