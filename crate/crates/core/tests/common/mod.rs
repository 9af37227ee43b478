#![allow(dead_code)]

use magpc::lds::{
    generate_disturbances, spectral_norm, DisturbanceProfile, LinearSystem, NormalSampler, QuadCost, StageCost,
};
use magpc::peo::{build_markov, MarkovOperator, PeoContext};
use magpc::policies::stack_window;
use nalgebra::{DMatrix, DVector};

/// Random plant with `‖A‖₂ = rho`, so `‖A^h‖ ≤ rho^h`.
pub fn random_system(rng: &mut NormalSampler, dx: usize, inputs: &[usize], rho: f64) -> LinearSystem {
    let raw = rng.matrix(dx, dx);
    let a = &raw * (rho / spectral_norm(&raw));
    let blocks = inputs.iter().map(|&d| rng.matrix(dx, d) * 0.5).collect();
    LinearSystem::new(a, blocks).unwrap()
}

/// Uniform integer in `lo..=hi`.
pub fn pick(rng: &mut NormalSampler, lo: usize, hi: usize) -> usize {
    lo + ((rng.uniform() * (hi - lo + 1) as f64) as usize).min(hi - lo)
}

/// Play time-varying random DAC policies on the true disturbances.
/// Returns states `x_0..x_T`, joint controls, and per-step per-agent parameters.
pub struct Played {
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub thetas: Vec<Vec<DMatrix<f64>>>,
}

pub fn play_random_dac(rng: &mut NormalSampler, sys: &LinearSystem, w: &[DVector<f64>], m: usize, scale: f64) -> Played {
    let dx = sys.state_dim();
    let mut x = DVector::zeros(dx);
    let mut out = Played {
        states: vec![x.clone()],
        controls: Vec::new(),
        thetas: Vec::new(),
    };
    for t in 0..w.len() {
        let win = stack_window(w, t, m, dx).unwrap();
        let mut u = DVector::zeros(sys.input_dim());
        let mut step = Vec::new();
        for i in 0..sys.agents() {
            let th = rng.matrix(sys.agent_input_dim(i), m * dx) * scale;
            let ui = &th * &win;
            u.rows_mut(sys.agent_offset(i), ui.len()).copy_from(&ui);
            step.push(th);
        }
        x = sys.step(&x, &u, &w[t]).unwrap();
        out.controls.push(u);
        out.states.push(x.clone());
        out.thetas.push(step);
    }
    out
}

/// `⌈log(1/eps) / log(1/rho)⌉`.
pub fn horizon_for(rho: f64, eps: f64) -> usize {
    ((1.0 / eps).ln() / (1.0 / rho).ln()).ceil() as usize
}

/// A random quadratic OCO-M game and the histories produced by OGD learners on it.
pub struct OcomRun {
    pub loss: magpc::oco::QuadraticMemoryLoss,
    pub domain: magpc::oco::ProductDomain,
    pub decisions: Vec<DVector<f64>>,
    pub learners: Vec<magpc::oco::LearnerState>,
}

/// `k` agents with `d`-dimensional unit balls, memory `h`, `rounds` rounds.
pub fn run_random_ocom(rng: &mut NormalSampler, k: usize, d: usize, h: usize, rounds: usize) -> OcomRun {
    use magpc::oco::{
        multiplayer_ocom_round, BallDomain, DecisionWindow, JointDecision, LearnerState, ProductDomain,
        MemoryLoss, QuadraticMemoryLoss, StepSchedule,
    };
    let dim = k * d;
    let loss = QuadraticMemoryLoss {
        weights: (0..=h).map(|_| rng.matrix(dim, dim)).collect(),
        targets: (0..7).map(|_| rng.vector(dim)).collect(),
    };
    let ball = BallDomain::vector(1.0, d).unwrap();
    let domain = ProductDomain::new(vec![ball; k]);
    let mut learners: Vec<LearnerState> = (0..k)
        .map(|_| {
            let start = DMatrix::from_iterator(d, 1, (0..d).map(|_| 0.5 * rng.uniform() - 0.25));
            LearnerState::starting_at(ball, StepSchedule::anytime(&ball), start)
        })
        .collect();
    let shapes = vec![(d, 1); k];
    let mut window = DecisionWindow::new(h);
    let mut decisions = Vec::with_capacity(rounds);
    for t in 0..rounds {
        let res = multiplayer_ocom_round(&mut learners, &mut window, |win| {
            let flat = win.flattened();
            let grads: Vec<_> = loss.grad(t, &flat).iter().map(|g| JointDecision::split(g, &shapes)).collect();
            (0..k).map(|i| grads.iter().map(|g| g.parts[i].clone()).collect()).collect()
        });
        match res {
            Ok(j) => decisions.push(j.concat()),
            // window still filling: the decision was committed but no loss is charged
            Err(_) if t < h => decisions.push(window.lag(0).unwrap().concat()),
            Err(e) => panic!("{e}"),
        }
    }
    OcomRun { loss, domain, decisions, learners }
}

/// Roll the true plant forward from `x_{t−h}` with agent `i`'s last `h + 1`
/// controls regenerated from `thetas` and everyone else's recorded controls.
pub fn brute_force(
    sys: &LinearSystem,
    cost: &QuadCost,
    w: &[DVector<f64>],
    played: &Played,
    agent: usize,
    thetas: &[DMatrix<f64>],
    t: usize,
    m: usize,
) -> f64 {
    let h = thetas.len() - 1;
    let dx = sys.state_dim();
    let regen = |s: usize| {
        let mut u = played.controls[s].clone();
        let ui = &thetas[t - s] * stack_window(w, s, m, dx).unwrap();
        u.rows_mut(sys.agent_offset(agent), ui.len()).copy_from(&ui);
        u
    };
    let mut y = played.states[t - h].clone();
    for s in t - h..t {
        y = sys.a() * &y + sys.b() * regen(s) + &w[s];
    }
    cost.eval(&y, &regen(t))
}

pub struct Instance {
    pub sys: LinearSystem,
    pub cost: QuadCost,
    pub w: Vec<DVector<f64>>,
    pub played: Played,
    pub xnat: Vec<DVector<f64>>,
    pub markov: MarkovOperator,
    pub m: usize,
    pub h: usize,
    pub t: usize,
}

impl Instance {
    pub fn random(seed: u64, rho: f64, h: Option<usize>) -> Self {
        let mut rng = NormalSampler::new(seed);
        let dx = pick(&mut rng, 1, 4);
        let k = pick(&mut rng, 1, 3);
        let inputs: Vec<usize> = (0..k).map(|_| pick(&mut rng, 1, 2)).collect();
        let sys = random_system(&mut rng, dx, &inputs, rho);
        let du: usize = inputs.iter().sum();
        let cost = QuadCost::scaled_identity(dx, du, 1.0 + rng.uniform(), 0.1 + rng.uniform()).unwrap();
        let m = pick(&mut rng, 1, 4);
        let h = h.unwrap_or_else(|| horizon_for(rho, 1e-8));
        let t = m + h + 20;
        let w = generate_disturbances(&DisturbanceProfile::Gaussian, seed, t + 1, dx).unwrap().w;
        let played = play_random_dac(&mut rng, &sys, &w, m, 0.3);
        let xnat = sys.natures_x(&w).unwrap();
        let markov = build_markov(&sys, h, None).unwrap();
        Self { sys, cost, w, played, xnat, markov, m, h, t }
    }

    pub fn ctx(&self) -> PeoContext<'_> {
        PeoContext {
            markov: &self.markov,
            cost: &self.cost,
            t: self.t,
            m: self.m,
            nature: &self.xnat[self.t],
            controls: &self.played.controls,
        }
    }

    pub fn random_thetas(&self, rng: &mut NormalSampler, agent: usize) -> Vec<DMatrix<f64>> {
        let (r, c) = (self.sys.agent_input_dim(agent), self.m * self.sys.state_dim());
        (0..=self.h).map(|_| rng.matrix(r, c) * 0.5).collect()
    }
}
