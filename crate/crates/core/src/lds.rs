//! Linear time-invariant dynamics, Nature's x / y sequences, strong-stability
//! certificates and seeded oblivious disturbance traces.
//!
//! Time is 0-based throughout the crate. The state starts at `x_0 = 0` and
//! evolves as `x_{t+1} = A x_t + B u_t + w_t`, so the cost at step `t` is paid
//! on `x_t`, which depends on `w_0 .. w_{t-1}`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LdsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("agent index {index} out of range for {agents} agents")]
    AgentIndex { index: usize, agents: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("system is not strongly stable (spectral radius {spectral_radius})")]
    NotStable { spectral_radius: f64 },
    #[error("unknown disturbance profile `{0}`")]
    UnknownProfile(String),
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("cost is not positive semidefinite (min eigenvalue {0})")]
    NotPsd(f64),
}

pub type Result<T, E = LdsError> = std::result::Result<T, E>;

fn dim_err(what: impl Into<String>) -> LdsError {
    LdsError::Dimension(what.into())
}

/// `x_{t+1} = A x_t + Σ_i B_i u^i_t + w_t`, with optional per-agent
/// observation maps `y^i_t = C_i x_t + e^i_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b_blocks: Vec<DMatrix<f64>>,
    b: DMatrix<f64>,
    offsets: Vec<usize>,
    // `None` means every agent observes the full state.
    c_blocks: Option<Vec<DMatrix<f64>>>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b_blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if !a.is_square() {
            return Err(LdsError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if b_blocks.is_empty() {
            return Err(dim_err("at least one input block is required"));
        }
        let dx = a.nrows();
        let mut offsets = Vec::with_capacity(b_blocks.len());
        let mut du = 0;
        for (i, blk) in b_blocks.iter().enumerate() {
            if blk.nrows() != dx {
                return Err(dim_err(format!(
                    "B_{} has {} rows, expected {dx}",
                    i + 1,
                    blk.nrows()
                )));
            }
            offsets.push(du);
            du += blk.ncols();
        }
        let mut b = DMatrix::zeros(dx, du);
        for (blk, &off) in b_blocks.iter().zip(&offsets) {
            b.view_mut((0, off), (dx, blk.ncols())).copy_from(blk);
        }
        Ok(Self {
            a,
            b_blocks,
            b,
            offsets,
            c_blocks: None,
        })
    }

    /// Attach one observation matrix per agent.
    pub fn with_observations(mut self, c_blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if c_blocks.len() != self.agents() {
            return Err(dim_err(format!(
                "{} observation matrices for {} agents",
                c_blocks.len(),
                self.agents()
            )));
        }
        for (i, c) in c_blocks.iter().enumerate() {
            if c.ncols() != self.state_dim() {
                return Err(dim_err(format!(
                    "C_{} has {} columns, expected {}",
                    i + 1,
                    c.ncols(),
                    self.state_dim()
                )));
            }
        }
        self.c_blocks = Some(c_blocks);
        Ok(self)
    }

    /// Same input/observation structure with a different transition matrix.
    pub fn with_transition(&self, a: DMatrix<f64>) -> Result<Self> {
        if a.shape() != self.a.shape() {
            return Err(dim_err("replacement transition matrix has the wrong shape"));
        }
        Ok(Self {
            a,
            ..self.clone()
        })
    }

    /// Single-agent view that owns the whole joint input.
    pub fn merged(&self) -> Self {
        Self {
            a: self.a.clone(),
            b_blocks: vec![self.b.clone()],
            b: self.b.clone(),
            offsets: vec![0],
            c_blocks: None,
        }
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Joint input matrix `[B_1 … B_k]`.
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn b_block(&self, agent: usize) -> Result<&DMatrix<f64>> {
        self.check_agent(agent)?;
        Ok(&self.b_blocks[agent])
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn agents(&self) -> usize {
        self.b_blocks.len()
    }

    pub fn agent_input_dim(&self, agent: usize) -> usize {
        self.b_blocks[agent].ncols()
    }

    pub fn agent_offset(&self, agent: usize) -> usize {
        self.offsets[agent]
    }

    /// Observation matrix of an agent; `None` when the agent sees the full state.
    pub fn observation(&self, agent: usize) -> Result<Option<&DMatrix<f64>>> {
        self.check_agent(agent)?;
        Ok(self.c_blocks.as_ref().map(|c| &c[agent]))
    }

    pub fn observation_dim(&self, agent: usize) -> Result<usize> {
        Ok(self
            .observation(agent)?
            .map_or(self.state_dim(), |c| c.nrows()))
    }

    fn check_agent(&self, agent: usize) -> Result<()> {
        if agent >= self.agents() {
            return Err(LdsError::AgentIndex {
                index: agent,
                agents: self.agents(),
            });
        }
        Ok(())
    }

    /// Agent `i`'s slice of a joint control vector.
    pub fn agent_slice(&self, u: &DVector<f64>, agent: usize) -> DVector<f64> {
        u.rows(self.offsets[agent], self.agent_input_dim(agent))
            .into_owned()
    }

    /// `A x + B u + w`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        let dx = self.state_dim();
        if x.len() != dx || w.len() != dx {
            return Err(dim_err(format!(
                "state/disturbance length {}/{} for state dimension {dx}",
                x.len(),
                w.len()
            )));
        }
        if u.len() != self.input_dim() {
            return Err(dim_err(format!(
                "control length {} for input dimension {}",
                u.len(),
                self.input_dim()
            )));
        }
        Ok(&self.a * x + &self.b * u + w)
    }

    /// Nature's x: the states `x_0 .. x_T` produced by zero control, with
    /// `x_0 = 0` and `x_{t+1} = A x_t + w_t`.
    pub fn natures_x(&self, w: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        let dx = self.state_dim();
        let mut out = Vec::with_capacity(w.len() + 1);
        let mut x = DVector::zeros(dx);
        out.push(x.clone());
        for (t, wt) in w.iter().enumerate() {
            if wt.len() != dx {
                return Err(dim_err(format!("w_{t} has length {}", wt.len())));
            }
            x = &self.a * &x + wt;
            out.push(x.clone());
        }
        Ok(out)
    }

    /// Nature's y for one agent: `y^nat_t = C_i x^nat_t + e^i_t` for `t < e.len()`.
    pub fn natures_y(
        &self,
        w: &[DVector<f64>],
        e: &[DVector<f64>],
        agent: usize,
    ) -> Result<Vec<DVector<f64>>> {
        let c = self.observation(agent)?;
        let dy = self.observation_dim(agent)?;
        if e.len() > w.len() + 1 {
            return Err(dim_err("observation noise is longer than the state trace"));
        }
        let xs = self.natures_x(&w[..e.len().saturating_sub(1).min(w.len())])?;
        xs.iter()
            .zip(e)
            .enumerate()
            .map(|(t, (x, et))| {
                if et.len() != dy {
                    return Err(dim_err(format!("e_{t} has length {}, expected {dy}", et.len())));
                }
                Ok(match c {
                    Some(c) => c * x + et,
                    None => x + et,
                })
            })
            .collect()
    }
}

/// Strong-stability data: `‖A^n‖ ≤ κ² (1 − γ)^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongStabilityCert {
    pub kappa: f64,
    pub gamma: f64,
    pub spectral_radius: f64,
}

impl StrongStabilityCert {
    /// `κ² W / γ`, the bound on `‖x^nat_t‖` for disturbances bounded by `W`.
    pub fn natures_bound(&self, disturbance_bound: f64) -> f64 {
        self.kappa * self.kappa * disturbance_bound / self.gamma
    }
}

pub const DEFAULT_STABILITY_MARGIN: f64 = 1e-9;
const CERT_POWERS: usize = 200;

pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(LdsError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

pub fn certify_stability(sys: &LinearSystem) -> Result<StrongStabilityCert> {
    certify_matrix(sys.a(), DEFAULT_STABILITY_MARGIN)
}

/// Certify `ρ(A) < 1 − margin` and fit `(κ, γ)` over the first 200 powers.
///
/// The decay rate is fixed at `1 − γ = ρ + (1 − ρ)/4` and `κ²` is the
/// smallest constant that dominates `‖A^n‖ / (1 − γ)^n` on the fitted range.
pub fn certify_matrix(a: &DMatrix<f64>, margin: f64) -> Result<StrongStabilityCert> {
    let rho = spectral_radius(a)?;
    if !(rho < 1.0 - margin) {
        return Err(LdsError::NotStable {
            spectral_radius: rho,
        });
    }
    let decay = rho + 0.25 * (1.0 - rho);
    let mut power = DMatrix::identity(a.nrows(), a.ncols());
    let mut kappa_sq: f64 = 1.0;
    let mut scale = 1.0;
    for _ in 1..=CERT_POWERS {
        power = a * &power;
        scale *= decay;
        kappa_sq = kappa_sq.max(spectral_norm(&power) / scale);
    }
    Ok(StrongStabilityCert {
        kappa: kappa_sq.sqrt(),
        gamma: 1.0 - decay,
        spectral_radius: rho,
    })
}

/// Standard normal samples from a seeded ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct NormalSampler {
    rng: ChaCha8Rng,
}

impl NormalSampler {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn sample(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    pub fn vector(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.sample())
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        // column-major fill order; kept fixed for reproducibility
        DMatrix::from_fn(rows, cols, |_, _| self.sample())
    }
}

/// Phases of the sinusoidal profile; cycled when the state dimension is not 5.
pub const SINUSOID_PHASES: [f64; 5] = [12.0, 21.0, 3.0, 42.0, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceProfile {
    Gaussian,
    RandomWalk,
    Sinusoidal,
    Zero,
    Custom(Vec<DVector<f64>>),
}

impl DisturbanceProfile {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::RandomWalk => "random_walk",
            Self::Sinusoidal => "sinusoidal",
            Self::Zero => "zero",
            Self::Custom(_) => "custom",
        }
    }
}

impl fmt::Display for DisturbanceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DisturbanceProfile {
    type Err = LdsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Self::Gaussian),
            "random_walk" | "random-walk" | "randomwalk" => Ok(Self::RandomWalk),
            "sinusoidal" | "sine" => Ok(Self::Sinusoidal),
            "zero" | "none" => Ok(Self::Zero),
            other => Err(LdsError::UnknownProfile(other.to_string())),
        }
    }
}

/// A disturbance trace fixed before any control is played.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceTrace {
    pub w: Vec<DVector<f64>>,
    /// Per-agent observation noise `e^i_t`, when agents observe partially.
    pub e: Option<Vec<Vec<DVector<f64>>>>,
    pub seed: u64,
    pub profile: DisturbanceProfile,
}

impl DisturbanceTrace {
    pub fn horizon(&self) -> usize {
        self.w.len()
    }

    pub fn max_norm(&self) -> f64 {
        self.w.iter().map(|w| w.norm()).fold(0.0, f64::max)
    }

    /// Add observation noise, one independent stream per agent.
    pub fn with_observation_noise(
        mut self,
        profile: &DisturbanceProfile,
        dims: &[usize],
    ) -> Result<Self> {
        let horizon = self.horizon();
        let e = dims
            .iter()
            .enumerate()
            .map(|(i, &d)| sample_profile(profile, self.seed, i as u64 + 1, horizon, d))
            .collect::<Result<Vec<_>>>()?;
        self.e = Some(e);
        Ok(self)
    }

    pub fn observation_noise(&self, agent: usize, dim: usize) -> Vec<DVector<f64>> {
        match &self.e {
            Some(e) => e[agent].clone(),
            None => vec![DVector::zeros(dim); self.horizon()],
        }
    }
}

/// Generate an oblivious trace `w_0 .. w_{T-1}`; a pure function of its arguments.
pub fn generate_disturbances(
    profile: &DisturbanceProfile,
    seed: u64,
    horizon: usize,
    dim: usize,
) -> Result<DisturbanceTrace> {
    Ok(DisturbanceTrace {
        w: sample_profile(profile, seed, 0, horizon, dim)?,
        e: None,
        seed,
        profile: profile.clone(),
    })
}

fn sample_profile(
    profile: &DisturbanceProfile,
    seed: u64,
    stream: u64,
    horizon: usize,
    dim: usize,
) -> Result<Vec<DVector<f64>>> {
    if horizon == 0 {
        return Err(LdsError::EmptyHorizon);
    }
    let mut normal = NormalSampler::with_stream(seed, stream);
    let trace = match profile {
        DisturbanceProfile::Zero => vec![DVector::zeros(dim); horizon],
        DisturbanceProfile::Gaussian => (0..horizon).map(|_| normal.vector(dim)).collect(),
        DisturbanceProfile::RandomWalk => {
            let mut w = DVector::zeros(dim);
            let mut out = Vec::with_capacity(horizon);
            out.push(w.clone());
            for _ in 1..horizon {
                w += normal.vector(dim);
                out.push(w.clone());
            }
            out
        }
        DisturbanceProfile::Sinusoidal => (0..horizon)
            .map(|t| {
                DVector::from_fn(dim, |i, _| {
                    (2.0 * t as f64 + SINUSOID_PHASES[i % SINUSOID_PHASES.len()]).sin()
                })
            })
            .collect(),
        DisturbanceProfile::Custom(w) => {
            if w.len() != horizon || w.iter().any(|v| v.len() != dim) {
                return Err(dim_err(format!(
                    "custom trace must hold {horizon} vectors of length {dim}"
                )));
            }
            w.clone()
        }
    };
    Ok(trace)
}

/// A per-step cost `c(x, u)`.
pub trait StageCost: Send + Sync {
    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64;

    /// `(∂c/∂x, ∂c/∂u)`. Falls back to central differences with step `1e-6`.
    fn grad(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        const STEP: f64 = 1e-6;
        let mut gx = DVector::zeros(x.len());
        let mut xp = x.clone();
        for i in 0..x.len() {
            xp[i] = x[i] + STEP;
            let hi = self.eval(&xp, u);
            xp[i] = x[i] - STEP;
            let lo = self.eval(&xp, u);
            xp[i] = x[i];
            gx[i] = (hi - lo) / (2.0 * STEP);
        }
        let mut gu = DVector::zeros(u.len());
        let mut up = u.clone();
        for i in 0..u.len() {
            up[i] = u[i] + STEP;
            let hi = self.eval(x, &up);
            up[i] = u[i] - STEP;
            let lo = self.eval(x, &up);
            up[i] = u[i];
            gu[i] = (hi - lo) / (2.0 * STEP);
        }
        (gx, gu)
    }
}

/// `c(x, u) = xᵀQx + 2xᵀNu + uᵀRu` with a PSD joint Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadCost {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    n: Option<DMatrix<f64>>,
}

impl QuadCost {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        Self::with_cross(q, None, r)
    }

    pub fn with_cross(q: DMatrix<f64>, n: Option<DMatrix<f64>>, r: DMatrix<f64>) -> Result<Self> {
        if !q.is_square() || !r.is_square() {
            return Err(dim_err("Q and R must be square"));
        }
        if let Some(n) = &n {
            if n.shape() != (q.nrows(), r.nrows()) {
                return Err(dim_err("cross term must be d_x × d_u"));
            }
        }
        let cost = Self { q, r, n };
        let hessian = cost.joint_hessian();
        let scale = hessian.abs().max().max(1.0);
        let min_eig = if hessian.is_empty() {
            0.0
        } else {
            hessian.symmetric_eigenvalues().min()
        };
        if min_eig < -1e-10 * scale {
            return Err(LdsError::NotPsd(min_eig));
        }
        Ok(cost)
    }

    pub fn identity(dx: usize, du: usize) -> Self {
        Self {
            q: DMatrix::identity(dx, dx),
            r: DMatrix::identity(du, du),
            n: None,
        }
    }

    pub fn scaled_identity(dx: usize, du: usize, q_scale: f64, r_scale: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(dx, dx) * q_scale,
            DMatrix::identity(du, du) * r_scale,
        )
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn cross(&self) -> Option<&DMatrix<f64>> {
        self.n.as_ref()
    }

    /// Symmetrised `[[Q, N], [Nᵀ, R]]`.
    pub fn joint_hessian(&self) -> DMatrix<f64> {
        let (dx, du) = (self.q.nrows(), self.r.nrows());
        let mut h = DMatrix::zeros(dx + du, dx + du);
        h.view_mut((0, 0), (dx, dx))
            .copy_from(&((&self.q + self.q.transpose()) * 0.5));
        h.view_mut((dx, dx), (du, du))
            .copy_from(&((&self.r + self.r.transpose()) * 0.5));
        if let Some(n) = &self.n {
            h.view_mut((0, dx), (dx, du)).copy_from(n);
            h.view_mut((dx, 0), (du, dx)).copy_from(&n.transpose());
        }
        h
    }

    /// `C` with `c(x, u) ≤ C D²` whenever `‖x‖, ‖u‖ ≤ D`.
    pub fn cost_constant(&self) -> f64 {
        let lmax = |m: &DMatrix<f64>| {
            if m.is_empty() {
                0.0
            } else {
                ((m + m.transpose()) * 0.5).symmetric_eigenvalues().max()
            }
        };
        lmax(&self.q) + lmax(&self.r) + 2.0 * self.n.as_ref().map_or(0.0, spectral_norm)
    }
}

impl StageCost for QuadCost {
    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let mut c = x.dot(&(&self.q * x)) + u.dot(&(&self.r * u));
        if let Some(n) = &self.n {
            c += 2.0 * x.dot(&(n * u));
        }
        c
    }

    fn grad(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let mut gx = &self.q * x + self.q.tr_mul(x);
        let mut gu = &self.r * u + self.r.tr_mul(u);
        if let Some(n) = &self.n {
            gx += n * u * 2.0;
            gu += n.tr_mul(x) * 2.0;
        }
        (gx, gu)
    }
}

/// A base quadratic cost with optional per-step replacements.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSchedule {
    base: QuadCost,
    overrides: BTreeMap<usize, QuadCost>,
}

impl CostSchedule {
    pub fn constant(base: QuadCost) -> Self {
        Self {
            base,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_override(mut self, t: usize, cost: QuadCost) -> Result<Self> {
        if cost.q.shape() != self.base.q.shape() || cost.r.shape() != self.base.r.shape() {
            return Err(dim_err("override cost has different dimensions"));
        }
        self.overrides.insert(t, cost);
        Ok(self)
    }

    pub fn at(&self, t: usize) -> &QuadCost {
        self.overrides.get(&t).unwrap_or(&self.base)
    }
}
