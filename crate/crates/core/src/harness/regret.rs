//! Offline best-in-hindsight joint DAC policy and the four-term regret split.

use nalgebra::{DMatrix, DVector};

use super::config::ExperimentConfig;
use super::experiment::{learning_plant, parameter_shapes, scenario_cost, scenario_system};
use super::log::ExperimentLog;
use super::HarnessError;
use crate::lds::{LinearSystem, QuadCost, StageCost};
use crate::oco::{minimize_projected, BallDomain, JointDecision, ProductDomain};
use crate::peo::{build_markov, PeoContext};
use crate::policies::stack_window;

/// Exact minimizer of the realized cost over fixed joint DAC policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfflineComparator {
    pub radius: f64,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for OfflineComparator {
    fn default() -> Self {
        Self {
            radius: 10.0,
            max_iters: 10_000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorSolution {
    /// Per-agent parameters.
    pub thetas: Vec<DMatrix<f64>>,
    /// `Σ_t c(x*_t, u*_t)` over the whole horizon.
    pub total_cost: f64,
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub converged: bool,
    pub residual: f64,
}

/// `J(θ) = θᵀHθ + 2gᵀθ + c₀`, the total cost of playing `θ` from `x_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub c0: f64,
}

impl QuadraticObjective {
    pub fn eval(&self, theta: &DVector<f64>) -> f64 {
        theta.dot(&(&self.h * theta)) + 2.0 * self.g.dot(theta) + self.c0
    }

    pub fn grad(&self, theta: &DVector<f64>) -> DVector<f64> {
        (&self.h * theta + &self.g) * 2.0
    }
}

/// Build `J` by propagating the state's Jacobian in the parameters:
/// `x_t = a_t + Φ_t θ`, `Φ_{t+1} = AΦ_t + B ∂u_t/∂θ`.
pub fn build_objective(
    sys: &LinearSystem,
    cost: &QuadCost,
    w: &[DVector<f64>],
    m: usize,
) -> Result<QuadraticObjective, HarnessError> {
    let shapes = parameter_shapes(sys, m);
    let n: usize = shapes.iter().map(|(r, c)| r * c).sum();
    let (dx, du) = (sys.state_dim(), sys.input_dim());
    let hess = cost.joint_hessian();
    let mut h = DMatrix::zeros(n, n);
    let mut g = DVector::zeros(n);
    let mut c0 = 0.0;
    let mut a = DVector::zeros(dx);
    let mut phi = DMatrix::zeros(dx, n);
    for t in 0..w.len() {
        let window = stack_window(w, t, m, dx)?;
        // vec(M ω) = (ωᵀ ⊗ I) vec(M), column-major
        let mut jac_u = DMatrix::zeros(du, n);
        let mut col = 0;
        for (i, &(rows, cols)) in shapes.iter().enumerate() {
            let off = sys.agent_offset(i);
            for c in 0..cols {
                for r in 0..rows {
                    jac_u[(off + r, col + c * rows + r)] = window[c];
                }
            }
            col += rows * cols;
        }
        let mut jac = DMatrix::zeros(dx + du, n);
        jac.rows_mut(0, dx).copy_from(&phi);
        jac.rows_mut(dx, du).copy_from(&jac_u);
        let mut z0 = DVector::zeros(dx + du);
        z0.rows_mut(0, dx).copy_from(&a);
        let hj = &hess * &jac;
        h += jac.tr_mul(&hj);
        g += hj.tr_mul(&z0);
        c0 += z0.dot(&(&hess * &z0));
        phi = sys.a() * &phi + sys.b() * &jac_u;
        a = sys.a() * &a + &w[t];
    }
    h = (&h + h.transpose()) * 0.5;
    Ok(QuadraticObjective { h, g, c0 })
}

impl OfflineComparator {
    pub fn solve(
        &self,
        sys: &LinearSystem,
        cost: &QuadCost,
        w: &[DVector<f64>],
        m: usize,
    ) -> Result<ComparatorSolution, HarnessError> {
        let objective = build_objective(sys, cost, w, m)?;
        let shapes = parameter_shapes(sys, m);
        let domain = ProductDomain::new(
            shapes
                .iter()
                .map(|&(r, c)| BallDomain::new(self.radius, r, c))
                .collect::<Result<_, _>>()?,
        );
        // interior optimum: the unconstrained minimizer already satisfies every radius
        if let Some(chol) = objective.h.clone().cholesky() {
            let point = -chol.solve(&objective.g);
            if domain.contains(&point) {
                let residual = objective.grad(&point).norm();
                return self.finish(sys, cost, w, m, &shapes, point, true, residual);
            }
        }
        let res = minimize_projected(
            &|th: &DVector<f64>| objective.eval(th),
            &|th: &DVector<f64>| objective.grad(th),
            &domain,
            DVector::zeros(domain.dim()),
            self.max_iters,
            self.tolerance,
        );
        self.finish(sys, cost, w, m, &shapes, res.point, res.converged, res.residual)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        sys: &LinearSystem,
        cost: &QuadCost,
        w: &[DVector<f64>],
        m: usize,
        shapes: &[(usize, usize)],
        point: DVector<f64>,
        converged: bool,
        residual: f64,
    ) -> Result<ComparatorSolution, HarnessError> {
        let thetas = JointDecision::split(&point, shapes).parts;
        let (states, controls) = rollout(sys, &thetas, w, m)?;
        let total_cost = (0..w.len()).map(|t| cost.eval(&states[t], &controls[t])).sum();
        Ok(ComparatorSolution {
            thetas,
            total_cost,
            states,
            controls,
            converged,
            residual,
        })
    }
}

/// Play fixed per-agent DAC parameters on the true disturbances from `x_0 = 0`.
pub fn rollout(
    sys: &LinearSystem,
    thetas: &[DMatrix<f64>],
    w: &[DVector<f64>],
    m: usize,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>), HarnessError> {
    let dx = sys.state_dim();
    let mut x = DVector::zeros(dx);
    let mut states = vec![x.clone()];
    let mut controls = Vec::with_capacity(w.len());
    for t in 0..w.len() {
        let window = stack_window(w, t, m, dx)?;
        let mut u = DVector::zeros(sys.input_dim());
        for (i, th) in thetas.iter().enumerate() {
            let ui = th * &window;
            u.rows_mut(sys.agent_offset(i), ui.len()).copy_from(&ui);
        }
        x = sys.step(&x, &u, &w[t])?;
        controls.push(u);
        states.push(x.clone());
    }
    Ok((states, controls))
}

/// Average regret and its four parts; every field is divided by `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTerms {
    pub burn_in: f64,
    pub algorithm_truncation: f64,
    pub policy_regret: f64,
    pub comparator_truncation: f64,
    /// Directly measured `(1/T)[Σ c(x_t,u_t) − Σ c(x*_t,u*_t)]`.
    pub total: f64,
    pub algorithm_cost: f64,
    pub comparator_cost: f64,
    pub comparator_converged: bool,
    pub comparator_residual: f64,
}

impl RegretTerms {
    pub fn sum(&self) -> f64 {
        self.burn_in + self.algorithm_truncation + self.policy_regret + self.comparator_truncation
    }
}

/// Split a learned-controller run into burn-in, algorithm truncation, policy
/// regret on the joint oracle, and comparator truncation.
pub fn measure_regret_terms(log: &ExperimentLog, oracle: &OfflineComparator) -> Result<RegretTerms, HarnessError> {
    let cfg: &ExperimentConfig = &log.config;
    let raw = scenario_system(cfg.scenario)?;
    let plant = learning_plant(cfg, &raw)?;
    let sys = plant.closed_loop().clone();
    let cost = plant.effective_cost(&scenario_cost(cfg, &raw)?)?;
    if log.thetas.len() != log.horizon() {
        return Err(HarnessError::Unsupported("regret terms need a learned-controller log".into()));
    }
    let thetas = per_agent_history(&sys, &log.thetas, cfg.m)?;
    decompose(&sys, &cost, &log.disturbances, &log.states, &log.learned, &thetas, cfg.m, cfg.h, cfg.burn_in, oracle)
}

fn per_agent_history(
    sys: &LinearSystem,
    thetas: &[Vec<DMatrix<f64>>],
    m: usize,
) -> Result<Vec<Vec<DMatrix<f64>>>, HarnessError> {
    let shapes = parameter_shapes(sys, m);
    thetas
        .iter()
        .map(|step| {
            if step.len() == shapes.len() {
                return Ok(step.clone());
            }
            // a merged controller plays one stacked matrix; split it by agent rows
            match step.as_slice() {
                [merged] if merged.nrows() == sys.input_dim() => Ok((0..sys.agents())
                    .map(|i| merged.rows(sys.agent_offset(i), sys.agent_input_dim(i)).into_owned())
                    .collect()),
                _ => Err(HarnessError::Unsupported("parameter history does not match the plant".into())),
            }
        })
        .collect()
}

/// The decomposition on explicit data. `thetas[t][i]` is agent `i`'s parameters at `t`.
#[allow(clippy::too_many_arguments)]
pub fn decompose(
    sys: &LinearSystem,
    cost: &QuadCost,
    w: &[DVector<f64>],
    states: &[DVector<f64>],
    controls: &[DVector<f64>],
    thetas: &[Vec<DMatrix<f64>>],
    m: usize,
    h: usize,
    burn_in: usize,
    oracle: &OfflineComparator,
) -> Result<RegretTerms, HarnessError> {
    let horizon = w.len();
    let comparator = oracle.solve(sys, cost, w, m)?;
    let markov = build_markov(sys, h, None)?;
    let xnat = sys.natures_x(w)?;
    let k = sys.agents();
    let signals: Vec<&[DVector<f64>]> = vec![w; k];
    let star: Vec<Vec<DMatrix<f64>>> = comparator.thetas.iter().map(|th| vec![th.clone(); h + 1]).collect();

    let (mut burn, mut alg_trunc, mut policy, mut comp_trunc) = (0.0, 0.0, 0.0, 0.0);
    let (mut alg_cost, mut comp_cost) = (0.0, 0.0);
    for t in 0..horizon {
        let c_alg = cost.eval(&states[t], &controls[t]);
        let c_star = cost.eval(&comparator.states[t], &comparator.controls[t]);
        alg_cost += c_alg;
        comp_cost += c_star;
        if t < burn_in.max(m + h) {
            burn += c_alg - c_star;
            continue;
        }
        let ctx = PeoContext {
            markov: &markov,
            cost,
            t,
            m,
            nature: &xnat[t],
            controls,
        };
        let played: Vec<Vec<DMatrix<f64>>> = (0..k)
            .map(|i| (0..=h).map(|r| thetas[t - r][i].clone()).collect())
            .collect();
        let l_played = ctx.joint_eval(&signals, &played)?;
        let l_star = ctx.joint_eval(&signals, &star)?;
        alg_trunc += c_alg - l_played;
        policy += l_played - l_star;
        comp_trunc += l_star - c_star;
    }
    let n = horizon as f64;
    Ok(RegretTerms {
        burn_in: burn / n,
        algorithm_truncation: alg_trunc / n,
        policy_regret: policy / n,
        comparator_truncation: comp_trunc / n,
        total: (alg_cost - comp_cost) / n,
        algorithm_cost: alg_cost / n,
        comparator_cost: comp_cost / n,
        comparator_converged: comparator.converged,
        comparator_residual: comparator.residual,
    })
}

/// Record the decomposition in a log's summary.
pub fn annotate_summary(log: &mut ExperimentLog, terms: &RegretTerms) {
    let s = &mut log.summary;
    s.set("regret_total", terms.total);
    s.set("regret_burn_in", terms.burn_in);
    s.set("regret_algorithm_truncation", terms.algorithm_truncation);
    s.set("regret_policy", terms.policy_regret);
    s.set("regret_comparator_truncation", terms.comparator_truncation);
    s.set("regret_terms_sum", terms.sum());
    s.set("comparator_average_cost", terms.comparator_cost);
    s.set("comparator_converged", terms.comparator_converged);
}
