//! Online convex optimization: projected online gradient descent, scripted
//! learners, the multiplayer linearization rounds with and without memory, and
//! regret measurement against an independent best-in-hindsight oracle.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OcoError {
    #[error("gradient has shape {got:?}, expected {expected:?}")]
    Shape {
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("gradient contains non-finite entries")]
    NonFinite,
    #[error("radius must be positive and finite, got {0}")]
    Radius(f64),
    #[error("oracle returned {got} gradients for {expected} agents")]
    AgentCount { got: usize, expected: usize },
    #[error("decision window holds {have} entries, memory needs {need}")]
    WindowTooShort { have: usize, need: usize },
    #[error("empty history")]
    EmptyHistory,
}

pub type Result<T, E = OcoError> = std::result::Result<T, E>;

/// Frobenius ball `{X : ‖X‖_F ≤ R}` of a fixed matrix shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallDomain {
    radius: f64,
    rows: usize,
    cols: usize,
}

impl BallDomain {
    pub fn new(radius: f64, rows: usize, cols: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(OcoError::Radius(radius));
        }
        Ok(Self { radius, rows, cols })
    }

    pub fn vector(radius: f64, dim: usize) -> Result<Self> {
        Self::new(radius, dim, 1)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn zeros(&self) -> DMatrix<f64> {
        DMatrix::zeros(self.rows, self.cols)
    }

    pub fn contains(&self, x: &DMatrix<f64>) -> bool {
        x.shape() == self.shape() && x.norm() <= self.radius * (1.0 + 1e-12)
    }

    /// Nearest point of the ball; interior points come back unchanged.
    pub fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.norm();
        if n <= self.radius {
            x.clone()
        } else {
            x * (self.radius / n)
        }
    }

    fn check(&self, g: &DMatrix<f64>) -> Result<()> {
        if g.shape() != self.shape() {
            return Err(OcoError::Shape {
                got: g.shape(),
                expected: self.shape(),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(OcoError::NonFinite);
        }
        Ok(())
    }
}

/// Step size `η_t` for round `t ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `scale / √t`
    InverseSqrt(f64),
    /// `scale / t`
    Inverse(f64),
    /// `D / (G √t)` with `G` the running max gradient norm.
    Adaptive { diameter: f64 },
}

impl StepSchedule {
    pub fn eta(&self, t: usize, grad_max: f64) -> f64 {
        let t = t.max(1) as f64;
        match *self {
            Self::Constant(eta) => eta,
            Self::InverseSqrt(scale) => scale / t.sqrt(),
            Self::Inverse(scale) => scale / t,
            Self::Adaptive { diameter } => {
                if grad_max > 0.0 {
                    diameter / (grad_max * t.sqrt())
                } else {
                    0.0
                }
            }
        }
    }

    pub fn anytime(domain: &BallDomain) -> Self {
        Self::Adaptive {
            diameter: 2.0 * domain.radius(),
        }
    }
}

/// How the gradient step interacts with the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Projection {
    /// Accumulate unprojected steps, play the projection of the accumulator.
    #[default]
    Lazy,
    /// Project after every step.
    Greedy,
}

/// Running sums that evaluate `Σ ⟨g, x − x̄⟩` against any fixed comparator.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    inner: f64,
    grad_sum: DMatrix<f64>,
    rounds: usize,
}

impl RegretLedger {
    pub fn new(shape: (usize, usize)) -> Self {
        Self {
            inner: 0.0,
            grad_sum: DMatrix::zeros(shape.0, shape.1),
            rounds: 0,
        }
    }

    fn add(&mut self, g: &DMatrix<f64>, x: &DMatrix<f64>) {
        self.inner += g.dot(x);
        self.grad_sum += g;
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Sum of linear losses actually suffered.
    pub fn linear_loss(&self) -> f64 {
        self.inner
    }

    pub fn gradient_sum(&self) -> &DMatrix<f64> {
        &self.grad_sum
    }

    pub fn regret_against(&self, comparator: &DMatrix<f64>) -> f64 {
        self.inner - self.grad_sum.dot(comparator)
    }

    /// Regret against the best point of `domain`: `Σ⟨g,x⟩ + R ‖Σ g‖`.
    pub fn best_regret(&self, domain: &BallDomain) -> f64 {
        self.inner + domain.radius() * self.grad_sum.norm()
    }
}

/// A learner in the online protocol: commit to a decision, then receive the
/// gradient blocks of a memory loss taken at its last `h + 1` decisions.
pub trait OnlineLearner {
    fn decision(&self) -> DMatrix<f64>;

    fn ledger(&self) -> &RegretLedger;

    /// `blocks[r]` is the gradient with respect to the decision played `r`
    /// rounds ago, `window[r]` that decision. The update uses `Σ_r blocks[r]`.
    fn feed(&mut self, blocks: &[DMatrix<f64>], window: &[DMatrix<f64>]) -> Result<()>;
}

impl<L: OnlineLearner + ?Sized> OnlineLearner for Box<L> {
    fn decision(&self) -> DMatrix<f64> {
        (**self).decision()
    }
    fn ledger(&self) -> &RegretLedger {
        (**self).ledger()
    }
    fn feed(&mut self, blocks: &[DMatrix<f64>], window: &[DMatrix<f64>]) -> Result<()> {
        (**self).feed(blocks, window)
    }
}

fn check_blocks(blocks: &[DMatrix<f64>], window: &[DMatrix<f64>], domain: &BallDomain) -> Result<()> {
    if blocks.is_empty() || blocks.len() != window.len() {
        return Err(OcoError::WindowTooShort {
            have: window.len(),
            need: blocks.len().max(1),
        });
    }
    for g in blocks {
        domain.check(g)?;
    }
    Ok(())
}

/// Projected online gradient descent on a Frobenius ball.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    domain: BallDomain,
    schedule: StepSchedule,
    projection: Projection,
    iterate: DMatrix<f64>,
    accumulator: DMatrix<f64>,
    t: usize,
    grad_max: f64,
    ledger: RegretLedger,
}

impl LearnerState {
    /// Starts at the centre of the ball.
    pub fn new(domain: BallDomain, schedule: StepSchedule) -> Self {
        Self::starting_at(domain, schedule, domain.zeros())
    }

    pub fn starting_at(domain: BallDomain, schedule: StepSchedule, start: DMatrix<f64>) -> Self {
        let iterate = domain.project(&start);
        Self {
            domain,
            schedule,
            projection: Projection::default(),
            accumulator: iterate.clone(),
            iterate,
            t: 0,
            grad_max: 0.0,
            ledger: RegretLedger::new(domain.shape()),
        }
    }

    pub fn with_projection(mut self, projection: Projection) -> Self {
        self.projection = projection;
        self
    }

    pub fn domain(&self) -> &BallDomain {
        &self.domain
    }

    pub fn iterate(&self) -> &DMatrix<f64> {
        &self.iterate
    }

    pub fn rounds(&self) -> usize {
        self.t
    }

    pub fn schedule(&self) -> StepSchedule {
        self.schedule
    }

    fn update(&mut self, g: &DMatrix<f64>) {
        self.t += 1;
        self.grad_max = self.grad_max.max(g.norm());
        let eta = self.schedule.eta(self.t, self.grad_max);
        match self.projection {
            Projection::Greedy => {
                self.iterate = self.domain.project(&(&self.iterate - g * eta));
                self.accumulator = self.iterate.clone();
            }
            Projection::Lazy => {
                self.accumulator -= g * eta;
                self.iterate = self.domain.project(&self.accumulator);
            }
        }
    }
}

impl OnlineLearner for LearnerState {
    fn decision(&self) -> DMatrix<f64> {
        self.iterate.clone()
    }

    fn ledger(&self) -> &RegretLedger {
        &self.ledger
    }

    fn feed(&mut self, blocks: &[DMatrix<f64>], window: &[DMatrix<f64>]) -> Result<()> {
        check_blocks(blocks, window, &self.domain)?;
        let mut total = self.domain.zeros();
        for (g, x) in blocks.iter().zip(window) {
            self.ledger.add(g, x);
            total += g;
        }
        self.ledger.rounds += 1;
        self.update(&total);
        Ok(())
    }
}

/// One OGD update on the linear loss `⟨g, ·⟩` at the current iterate.
pub fn ogd_step(mut state: LearnerState, g: &DMatrix<f64>) -> Result<LearnerState> {
    let x = state.iterate.clone();
    state.feed(std::slice::from_ref(g), std::slice::from_ref(&x))?;
    Ok(state)
}

/// Plays a fixed cyclic script regardless of feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedLearner {
    script: Vec<DMatrix<f64>>,
    t: usize,
    ledger: RegretLedger,
}

impl ScriptedLearner {
    pub fn new(script: Vec<DMatrix<f64>>) -> Self {
        assert!(!script.is_empty(), "script needs at least one decision");
        let shape = script[0].shape();
        Self {
            script,
            t: 0,
            ledger: RegretLedger::new(shape),
        }
    }

    /// Alternates `+a, −a, +a, …` in one dimension.
    pub fn alternating(a: f64) -> Self {
        Self::new(vec![
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, -a),
        ])
    }
}

impl OnlineLearner for ScriptedLearner {
    fn decision(&self) -> DMatrix<f64> {
        self.script[self.t % self.script.len()].clone()
    }

    fn ledger(&self) -> &RegretLedger {
        &self.ledger
    }

    fn feed(&mut self, blocks: &[DMatrix<f64>], window: &[DMatrix<f64>]) -> Result<()> {
        if blocks.is_empty() || blocks.len() != window.len() {
            return Err(OcoError::WindowTooShort {
                have: window.len(),
                need: blocks.len().max(1),
            });
        }
        for (g, x) in blocks.iter().zip(window) {
            self.ledger.add(g, x);
        }
        self.ledger.rounds += 1;
        self.t += 1;
        Ok(())
    }
}

/// Per-agent decisions of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDecision {
    pub parts: Vec<DMatrix<f64>>,
}

impl JointDecision {
    pub fn agents(&self) -> usize {
        self.parts.len()
    }

    pub fn dim(&self) -> usize {
        self.parts.iter().map(|p| p.len()).sum()
    }

    /// Column-major flattening of every part, agents in order.
    pub fn concat(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.parts.iter().flat_map(|p| p.iter().copied()),
        )
    }

    /// Inverse of [`concat`](Self::concat) given the part shapes.
    pub fn split(flat: &DVector<f64>, shapes: &[(usize, usize)]) -> Self {
        let mut off = 0;
        let parts = shapes
            .iter()
            .map(|&(r, c)| {
                let p = DMatrix::from_column_slice(r, c, &flat.as_slice()[off..off + r * c]);
                off += r * c;
                p
            })
            .collect();
        Self { parts }
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.parts.iter().map(|p| p.shape()).collect()
    }
}

/// The current decisions of all learners.
pub fn current_joint<L: OnlineLearner>(learners: &[L]) -> JointDecision {
    JointDecision {
        parts: learners.iter().map(|l| l.decision()).collect(),
    }
}

/// The last `h + 1` joint decisions, newest first.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionWindow {
    memory: usize,
    entries: VecDeque<JointDecision>,
}

impl DecisionWindow {
    pub fn new(memory: usize) -> Self {
        Self {
            memory,
            entries: VecDeque::with_capacity(memory + 1),
        }
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.memory + 1
    }

    pub fn push(&mut self, joint: JointDecision) {
        if self.entries.len() == self.memory + 1 {
            self.entries.pop_back();
        }
        self.entries.push_front(joint);
    }

    /// Joint decision played `lag` rounds ago.
    pub fn lag(&self, lag: usize) -> Option<&JointDecision> {
        self.entries.get(lag)
    }

    /// Agent `i`'s decisions, newest first.
    pub fn agent(&self, agent: usize) -> Vec<DMatrix<f64>> {
        self.entries.iter().map(|j| j.parts[agent].clone()).collect()
    }

    /// Flattened joint decisions, newest first.
    pub fn flattened(&self) -> Vec<DVector<f64>> {
        self.entries.iter().map(|j| j.concat()).collect()
    }
}

/// One round of the linearized multiplayer protocol without memory.
///
/// Every learner commits before `oracle` sees the joint decision; the oracle
/// returns `∇ℓ^i_t(x^i_t)` for each agent, which is fed back as a linear loss.
pub fn multiplayer_oco_round<L, F>(learners: &mut [L], oracle: F) -> Result<JointDecision>
where
    L: OnlineLearner,
    F: FnOnce(&JointDecision) -> Vec<DMatrix<f64>>,
{
    let joint = current_joint(learners);
    let grads = oracle(&joint);
    if grads.len() != learners.len() {
        return Err(OcoError::AgentCount {
            got: grads.len(),
            expected: learners.len(),
        });
    }
    for ((learner, g), x) in learners.iter_mut().zip(&grads).zip(&joint.parts) {
        learner.feed(std::slice::from_ref(g), std::slice::from_ref(x))?;
    }
    Ok(joint)
}

/// One round of the linearized multiplayer protocol with memory `h`.
///
/// The committed joint decision is pushed onto `window`, which must then hold
/// `h + 1` entries. `oracle` returns, per agent, the `h + 1` gradient blocks
/// of `ℓ^i_t` at the agent's window slice, newest first.
pub fn multiplayer_ocom_round<L, F>(
    learners: &mut [L],
    window: &mut DecisionWindow,
    oracle: F,
) -> Result<JointDecision>
where
    L: OnlineLearner,
    F: FnOnce(&DecisionWindow) -> Vec<Vec<DMatrix<f64>>>,
{
    let joint = current_joint(learners);
    window.push(joint.clone());
    if !window.is_full() {
        return Err(OcoError::WindowTooShort {
            have: window.len(),
            need: window.memory() + 1,
        });
    }
    let grads = oracle(window);
    if grads.len() != learners.len() {
        return Err(OcoError::AgentCount {
            got: grads.len(),
            expected: learners.len(),
        });
    }
    for (i, (learner, blocks)) in learners.iter_mut().zip(&grads).enumerate() {
        learner.feed(blocks, &window.agent(i))?;
    }
    Ok(joint)
}

/// A loss on the last `h + 1` flattened joint decisions (newest first).
pub trait MemoryLoss {
    fn memory(&self) -> usize;

    fn eval(&self, t: usize, window: &[DVector<f64>]) -> f64;

    fn grad(&self, t: usize, window: &[DVector<f64>]) -> Vec<DVector<f64>>;

    /// `ℓ̄_t(x) = ℓ_t(x, …, x)`.
    fn eval_repeated(&self, t: usize, x: &DVector<f64>) -> f64 {
        self.eval(t, &vec![x.clone(); self.memory() + 1])
    }

    fn grad_repeated(&self, t: usize, x: &DVector<f64>) -> DVector<f64> {
        self.grad(t, &vec![x.clone(); self.memory() + 1])
            .into_iter()
            .fold(DVector::zeros(x.len()), |acc, g| acc + g)
    }
}

/// Product of per-agent balls over a flattened joint vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDomain {
    blocks: Vec<BallDomain>,
}

impl ProductDomain {
    pub fn new(blocks: Vec<BallDomain>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[BallDomain] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.clone();
        let mut off = 0;
        for b in &self.blocks {
            let n = b.dim();
            let norm = x.rows(off, n).norm();
            if norm > b.radius() {
                out.rows_mut(off, n).scale_mut(b.radius() / norm);
            }
            off += n;
        }
        out
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        let mut off = 0;
        self.blocks.iter().all(|b| {
            let n = b.dim();
            let ok = x.rows(off, n).norm() <= b.radius() * (1.0 + 1e-12);
            off += n;
            ok
        })
    }

    /// Block `i` of a flattened vector.
    pub fn block(&self, x: &DVector<f64>, agent: usize) -> DMatrix<f64> {
        let off: usize = self.blocks[..agent].iter().map(|b| b.dim()).sum();
        let (r, c) = self.blocks[agent].shape();
        DMatrix::from_column_slice(r, c, &x.as_slice()[off..off + r * c])
    }
}

/// Result of a best-in-hindsight minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub point: DVector<f64>,
    pub value: f64,
    /// Norm of the projected-gradient mapping at `point`.
    pub residual: f64,
    pub converged: bool,
}

/// Minimizes a convex function over a product of balls, independently of any learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparatorOracle {
    /// Final grid spacing for low-dimensional problems.
    pub grid_resolution: f64,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for ComparatorOracle {
    fn default() -> Self {
        Self {
            grid_resolution: 1e-3,
            max_iters: 10_000,
            tolerance: 1e-8,
        }
    }
}

impl ComparatorOracle {
    /// Grid search when the dimension is at most 2, projected gradient otherwise.
    pub fn minimize<F, G>(&self, f: F, grad: G, domain: &ProductDomain) -> OracleResult
    where
        F: Fn(&DVector<f64>) -> f64,
        G: Fn(&DVector<f64>) -> DVector<f64>,
    {
        if domain.dim() <= 2 {
            let mut res = minimize_grid(&f, domain, self.grid_resolution);
            res.residual = gradient_mapping(&grad, domain, &res.point, 1.0);
            res
        } else {
            let start = DVector::zeros(domain.dim());
            minimize_projected(&f, &grad, domain, start, self.max_iters, self.tolerance)
        }
    }
}

fn gradient_mapping<G>(grad: &G, domain: &ProductDomain, x: &DVector<f64>, step: f64) -> f64
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let moved = domain.project(&(x - grad(x) * step));
    (moved - x).norm() / step
}

/// Coarse-to-fine grid search over the bounding box of `domain` (dimension ≤ 2).
///
/// Each pass scans 41 points per axis and recentres on the best point, shrinking
/// the box until the spacing reaches `resolution`; a fine scan ends the search.
pub fn minimize_grid<F>(f: &F, domain: &ProductDomain, resolution: f64) -> OracleResult
where
    F: Fn(&DVector<f64>) -> f64,
{
    let dim = domain.dim();
    assert!(dim <= 2, "grid search supports at most two dimensions");
    let radius = domain
        .blocks()
        .iter()
        .map(|b| b.radius())
        .fold(0.0, f64::max);
    let mut centre = DVector::zeros(dim);
    let mut half = radius;
    let mut best = (f(&centre), centre.clone());
    const POINTS: usize = 41;
    loop {
        let spacing = 2.0 * half / (POINTS - 1) as f64;
        let axis = |k: usize, c: f64| c - half + spacing * k as f64;
        let mut visit = |p: DVector<f64>| {
            if domain.contains(&p) {
                let v = f(&p);
                if v < best.0 {
                    best = (v, p);
                }
            }
        };
        match dim {
            0 => {}
            1 => (0..POINTS).for_each(|i| visit(DVector::from_element(1, axis(i, centre[0])))),
            _ => {
                for i in 0..POINTS {
                    for j in 0..POINTS {
                        visit(DVector::from_vec(vec![axis(i, centre[0]), axis(j, centre[1])]));
                    }
                }
            }
        }
        centre = best.1.clone();
        if spacing <= resolution {
            break;
        }
        half = (4.0 * spacing).max(resolution * (POINTS - 1) as f64 / 2.0);
    }
    OracleResult {
        point: best.1,
        value: best.0,
        residual: 0.0,
        converged: true,
    }
}

/// Accelerated projected gradient with backtracking and adaptive restart.
///
/// Stops when the projected step from the extrapolated point is below `tol · (1 + ‖x‖)`.
pub fn minimize_projected<F, G>(
    f: &F,
    grad: &G,
    domain: &ProductDomain,
    start: DVector<f64>,
    max_iters: usize,
    tol: f64,
) -> OracleResult
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x = domain.project(&start);
    let mut fx = f(&x);
    let mut y = x.clone();
    let mut momentum = 1.0_f64;
    let mut lipschitz = 1.0_f64;
    let mut converged = false;
    let mut restarted = false;
    for _ in 0..max_iters {
        let fy = f(&y);
        let gy = grad(&y);
        let (next, f_next) = loop {
            let cand = domain.project(&(&y - &gy * (1.0 / lipschitz)));
            let diff = &cand - &y;
            let f_cand = f(&cand);
            let model = fy + gy.dot(&diff) + 0.5 * lipschitz * diff.norm_squared();
            if f_cand <= model + 1e-12 * fy.abs().max(1.0) || lipschitz > 1e30 {
                break (cand, f_cand);
            }
            lipschitz *= 2.0;
        };
        let step = (&next - &y).norm();
        if f_next > fx && !restarted {
            // restart momentum from the last accepted point
            y = x.clone();
            momentum = 1.0;
            restarted = true;
            if step <= tol * (1.0 + x.norm()) {
                converged = true;
                break;
            }
            continue;
        }
        // a plain projected step cannot increase f beyond rounding, so take it
        restarted = false;
        let m_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        y = &next + (&next - &x) * ((momentum - 1.0) / m_next);
        momentum = m_next;
        x = next;
        fx = f_next;
        lipschitz *= 0.9;
        if step <= tol * (1.0 + x.norm()) {
            converged = true;
            break;
        }
    }
    let residual = gradient_mapping(grad, domain, &x, 1.0 / lipschitz.max(1e-12));
    OracleResult {
        point: x,
        value: fx,
        residual,
        converged,
    }
}

/// Measured regret with memory, averaged over loss rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub average_regret: f64,
    pub total_loss: f64,
    pub comparator_loss: f64,
    pub rounds: usize,
    pub comparator: OracleResult,
}

/// `(1/T)[Σ_t ℓ_t(x_{t−h:t}) − min_x Σ_t ℓ̄_t(x)]` over rounds `t ≥ h`.
///
/// `decisions` are flattened joint decisions in chronological order.
pub fn eval_multiagent_regret<L: MemoryLoss + ?Sized>(
    loss: &L,
    decisions: &[DVector<f64>],
    domain: &ProductDomain,
    oracle: &ComparatorOracle,
) -> Result<RegretReport> {
    let h = loss.memory();
    if decisions.len() <= h {
        return Err(OcoError::EmptyHistory);
    }
    let rounds: Vec<usize> = (h..decisions.len()).collect();
    let total_loss: f64 = rounds
        .iter()
        .map(|&t| {
            let window: Vec<_> = (0..=h).map(|r| decisions[t - r].clone()).collect();
            loss.eval(t, &window)
        })
        .sum();
    let comparator = oracle.minimize(
        |x| rounds.iter().map(|&t| loss.eval_repeated(t, x)).sum(),
        |x| {
            rounds
                .iter()
                .fold(DVector::zeros(x.len()), |acc, &t| acc + loss.grad_repeated(t, x))
        },
        domain,
    );
    let n = rounds.len() as f64;
    Ok(RegretReport {
        average_regret: (total_loss - comparator.value) / n,
        total_loss,
        comparator_loss: comparator.value,
        rounds: rounds.len(),
        comparator,
    })
}

/// Quadratic memory loss `Σ_r ‖P_r x_{t−r} − c_t‖² / (h+1)` with a drifting target.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticMemoryLoss {
    pub weights: Vec<DMatrix<f64>>,
    pub targets: Vec<DVector<f64>>,
}

impl QuadraticMemoryLoss {
    fn residual(&self, t: usize, r: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.weights[r] * x - &self.targets[t % self.targets.len()]
    }
}

impl MemoryLoss for QuadraticMemoryLoss {
    fn memory(&self) -> usize {
        self.weights.len() - 1
    }

    fn eval(&self, t: usize, window: &[DVector<f64>]) -> f64 {
        let scale = 1.0 / self.weights.len() as f64;
        window
            .iter()
            .enumerate()
            .map(|(r, x)| self.residual(t, r, x).norm_squared())
            .sum::<f64>()
            * scale
    }

    fn grad(&self, t: usize, window: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let scale = 2.0 / self.weights.len() as f64;
        window
            .iter()
            .enumerate()
            .map(|(r, x)| self.weights[r].tr_mul(&self.residual(t, r, x)) * scale)
            .collect()
    }
}
