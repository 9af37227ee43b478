//! Policy classes: disturbance-action (DAC), disturbance-response (DRC),
//! linear state feedback, open loop, and linear dynamical controllers (LDC).
//!
//! Window signals use the convention `signal[s]` = value at time `s`
//! (`w_s` or `y^nat_s`). At time `t` a window policy reads
//! `signal[t−1], …, signal[t−m]`, newest first, with zeros for negative
//! indices.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::lds::{spectral_radius, DisturbanceTrace, LdsError, LinearSystem};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("feedback gain is not stabilizing (spectral radius {0})")]
    NotStabilizing(f64),
    #[error("malformed matrix text: {0}")]
    Parse(String),
    #[error(transparent)]
    Lds(#[from] LdsError),
}

pub type Result<T, E = PolicyError> = std::result::Result<T, E>;

fn dim_err(msg: impl Into<String>) -> PolicyError {
    PolicyError::Dimension(msg.into())
}

/// `stack(signal[t−1], …, signal[t−m])`, zero-padded before time 0.
pub fn stack_window(signal: &[DVector<f64>], t: usize, m: usize, dim: usize) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(m * dim);
    for lag in 1..=m {
        if lag > t {
            break;
        }
        let v = signal
            .get(t - lag)
            .ok_or_else(|| dim_err(format!("signal has no entry for time {}", t - lag)))?;
        if v.len() != dim {
            return Err(dim_err(format!("signal entry has length {}, expected {dim}", v.len())));
        }
        out.rows_mut((lag - 1) * dim, dim).copy_from(v);
    }
    Ok(out)
}

fn window_control(matrix: &DMatrix<f64>, window: &DVector<f64>) -> Result<DVector<f64>> {
    if matrix.ncols() != window.len() {
        return Err(dim_err(format!(
            "policy expects a window of length {}, got {}",
            matrix.ncols(),
            window.len()
        )));
    }
    Ok(matrix * window)
}

fn check_window_shape(matrix: &DMatrix<f64>, m: usize) -> Result<usize> {
    if m == 0 || !matrix.ncols().is_multiple_of(m) {
        return Err(dim_err(format!(
            "{} columns cannot hold a window of length {m}",
            matrix.ncols()
        )));
    }
    Ok(matrix.ncols() / m)
}

/// `u_t = M · stack(w_{t−1}, …, w_{t−m})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DacPolicy {
    matrix: DMatrix<f64>,
    m: usize,
    signal_dim: usize,
}

impl DacPolicy {
    pub fn new(matrix: DMatrix<f64>, m: usize) -> Result<Self> {
        let signal_dim = check_window_shape(&matrix, m)?;
        Ok(Self { matrix, m, signal_dim })
    }

    pub fn zero(input_dim: usize, state_dim: usize, m: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(input_dim, m * state_dim),
            m,
            signal_dim: state_dim,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn window_len(&self) -> usize {
        self.m
    }

    pub fn signal_dim(&self) -> usize {
        self.signal_dim
    }

    pub fn control(&self, window: &DVector<f64>) -> Result<DVector<f64>> {
        window_control(&self.matrix, window)
    }

    /// Control at time `t` from the disturbance trace.
    pub fn control_at(&self, w: &[DVector<f64>], t: usize) -> Result<DVector<f64>> {
        self.control(&stack_window(w, t, self.m, self.signal_dim)?)
    }
}

/// `u_t = M · stack(y^nat_{t−1}, …, y^nat_{t−m})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrcPolicy {
    matrix: DMatrix<f64>,
    m: usize,
    signal_dim: usize,
}

impl DrcPolicy {
    pub fn new(matrix: DMatrix<f64>, m: usize) -> Result<Self> {
        let signal_dim = check_window_shape(&matrix, m)?;
        Ok(Self { matrix, m, signal_dim })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn window_len(&self) -> usize {
        self.m
    }

    pub fn control(&self, window: &DVector<f64>) -> Result<DVector<f64>> {
        window_control(&self.matrix, window)
    }

    pub fn control_at(&self, ynat: &[DVector<f64>], t: usize) -> Result<DVector<f64>> {
        self.control(&stack_window(ynat, t, self.m, self.signal_dim)?)
    }
}

/// `u_t = −K x_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFeedback {
    k: DMatrix<f64>,
}

impl LinearFeedback {
    pub fn new(k: DMatrix<f64>) -> Self {
        Self { k }
    }

    /// Accepts `K` only if `ρ(A − BK) < 1`.
    pub fn stabilizing(sys: &LinearSystem, k: DMatrix<f64>) -> Result<Self> {
        if k.shape() != (sys.input_dim(), sys.state_dim()) {
            return Err(dim_err("K must be d_u × d_x"));
        }
        let rho = spectral_radius(&(sys.a() - sys.b() * &k))?;
        if rho >= 1.0 {
            return Err(PolicyError::NotStabilizing(rho));
        }
        Ok(Self { k })
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn control(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.k.ncols() {
            return Err(dim_err(format!("state length {} for gain with {} columns", x.len(), self.k.ncols())));
        }
        Ok(-(&self.k * x))
    }
}

/// A precomputed control schedule; zero once the schedule runs out.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenLoopPolicy {
    schedule: Vec<DVector<f64>>,
    dim: usize,
}

impl OpenLoopPolicy {
    pub fn new(schedule: Vec<DVector<f64>>, dim: usize) -> Result<Self> {
        if schedule.iter().any(|u| u.len() != dim) {
            return Err(dim_err("schedule entries must share the control dimension"));
        }
        Ok(Self { schedule, dim })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            schedule: Vec::new(),
            dim,
        }
    }

    pub fn control(&self, t: usize) -> DVector<f64> {
        self.schedule
            .get(t)
            .cloned()
            .unwrap_or_else(|| DVector::zeros(self.dim))
    }
}

/// `s_{t+1} = A_π s_t + B_π x_t`, `u_t = C_π s_t + D_π x_t`. Comparator class only.
#[derive(Debug, Clone, PartialEq)]
pub struct LdcPolicy {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    state: DVector<f64>,
}

impl LdcPolicy {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let ds = a.nrows();
        if !a.is_square() || b.nrows() != ds || c.ncols() != ds || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(dim_err("inconsistent LDC matrices"));
        }
        Ok(Self {
            state: DVector::zeros(ds),
            a,
            b,
            c,
            d,
        })
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    /// Emit `u_t` for observation `x_t` and advance the internal state.
    pub fn step(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.b.ncols() {
            return Err(dim_err("observation length does not match B_π"));
        }
        let u = &self.c * &self.state + &self.d * x;
        self.state = &self.a * &self.state + &self.b * x;
        Ok(u)
    }
}

/// A per-agent policy used in joint simulations.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentPolicy {
    Dac(DacPolicy),
    Drc(DrcPolicy),
    Feedback(LinearFeedback),
    OpenLoop(OpenLoopPolicy),
}

/// States `x_0 … x_T` and per-agent controls `u^i_0 … u^i_{T−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<Vec<DVector<f64>>>,
}

/// Roll out the plant with one policy per agent.
///
/// DAC agents read the true disturbances, DRC agents their own Nature's y and
/// feedback agents the raw state.
pub fn simulate_joint(
    sys: &LinearSystem,
    policies: &[AgentPolicy],
    trace: &DisturbanceTrace,
) -> Result<JointTrajectory> {
    if policies.len() != sys.agents() {
        return Err(dim_err(format!("{} policies for {} agents", policies.len(), sys.agents())));
    }
    let horizon = trace.horizon();
    let ynat: Vec<Option<Vec<DVector<f64>>>> = policies
        .iter()
        .enumerate()
        .map(|(i, p)| match p {
            AgentPolicy::Drc(_) => {
                let dy = sys.observation_dim(i)?;
                let e = trace.observation_noise(i, dy);
                sys.natures_y(&trace.w, &e, i).map(Some)
            }
            _ => Ok(None),
        })
        .collect::<Result<_, LdsError>>()?;

    let mut x = DVector::zeros(sys.state_dim());
    let mut states = vec![x.clone()];
    let mut controls = vec![Vec::with_capacity(horizon); sys.agents()];
    for t in 0..horizon {
        let mut u = DVector::zeros(sys.input_dim());
        for (i, p) in policies.iter().enumerate() {
            let ui = match p {
                AgentPolicy::Dac(p) => p.control_at(&trace.w, t)?,
                AgentPolicy::Drc(p) => p.control_at(ynat[i].as_ref().expect("computed above"), t)?,
                AgentPolicy::Feedback(k) => k.control(&x)?,
                AgentPolicy::OpenLoop(p) => p.control(t),
            };
            if ui.len() != sys.agent_input_dim(i) {
                return Err(dim_err(format!("agent {} produced a control of length {}", i + 1, ui.len())));
            }
            u.rows_mut(sys.agent_offset(i), ui.len()).copy_from(&ui);
            controls[i].push(ui);
        }
        x = sys.step(&x, &u, &trace.w[t])?;
        states.push(x.clone());
    }
    Ok(JointTrajectory { states, controls })
}

/// Replace agent `varied`'s policy and report whether every other agent's
/// control sequence stays bit-identical.
pub fn decoupling_check(
    sys: &LinearSystem,
    policies: &[AgentPolicy],
    varied: usize,
    replacement: AgentPolicy,
    trace: &DisturbanceTrace,
) -> Result<bool> {
    if varied >= policies.len() {
        return Err(LdsError::AgentIndex {
            index: varied,
            agents: policies.len(),
        }
        .into());
    }
    let base = simulate_joint(sys, policies, trace)?;
    let mut alt_policies = policies.to_vec();
    alt_policies[varied] = replacement;
    let alt = simulate_joint(sys, &alt_policies, trace)?;
    Ok((0..policies.len())
        .filter(|&i| i != varied)
        .all(|i| base.controls[i] == alt.controls[i]))
}

/// Text checkpoint: a `matrix <rows> <cols>` header, then one row per line.
pub fn write_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("matrix {} {}\n", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn read_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| PolicyError::Parse("empty input".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (rows, cols) = match fields.as_slice() {
        ["matrix", r, c] => (
            r.parse::<usize>().map_err(|e| PolicyError::Parse(e.to_string()))?,
            c.parse::<usize>().map_err(|e| PolicyError::Parse(e.to_string()))?,
        ),
        _ => return Err(PolicyError::Parse(format!("bad header `{header}`"))),
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        if i >= rows {
            return Err(PolicyError::Parse("more rows than declared".into()));
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|e| PolicyError::Parse(e.to_string())))
            .collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(PolicyError::Parse(format!("row {} has {} entries, expected {cols}", i + 1, row.len())));
        }
        data.extend(row);
    }
    if data.len() != rows * cols {
        return Err(PolicyError::Parse("fewer rows than declared".into()));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}
