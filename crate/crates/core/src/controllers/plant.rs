use nalgebra::{DMatrix, DVector};

use super::{ControlError, Result};
use crate::lds::{spectral_radius, LinearSystem, QuadCost};
use crate::policies::LinearFeedback;

/// A plant run under a shared baseline `u = −Kx + u_learned`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizedPlant {
    raw: LinearSystem,
    closed: LinearSystem,
    baseline: LinearFeedback,
}

/// Wrap `sys` with the baseline `K`; rejects gains with `ρ(A − BK) ≥ 1`.
pub fn stabilize_and_wrap(sys: &LinearSystem, baseline: LinearFeedback) -> Result<StabilizedPlant> {
    let k = baseline.gain();
    if k.shape() != (sys.input_dim(), sys.state_dim()) {
        return Err(ControlError::Dimension("baseline gain must be d_u × d_x".into()));
    }
    let a_bar = sys.a() - sys.b() * k;
    let rho = spectral_radius(&a_bar)?;
    if rho >= 1.0 {
        return Err(ControlError::NotStabilizing(rho));
    }
    Ok(StabilizedPlant {
        closed: sys.with_transition(a_bar)?,
        raw: sys.clone(),
        baseline,
    })
}

impl StabilizedPlant {
    /// A stable plant with no baseline.
    pub fn unwrapped(sys: &LinearSystem) -> Result<Self> {
        stabilize_and_wrap(sys, LinearFeedback::new(DMatrix::zeros(sys.input_dim(), sys.state_dim())))
    }

    pub fn raw(&self) -> &LinearSystem {
        &self.raw
    }

    /// `(A − BK, B)`, the system learned controllers act on.
    pub fn closed_loop(&self) -> &LinearSystem {
        &self.closed
    }

    pub fn baseline(&self) -> &LinearFeedback {
        &self.baseline
    }

    pub fn total_control(&self, x: &DVector<f64>, learned: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.baseline.control(x)? + learned)
    }

    pub fn step(&self, x: &DVector<f64>, learned: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.closed.step(x, learned, w)?)
    }

    /// `c(x, −Kx + u)` written as a quadratic in `(x, u)` with a cross term.
    pub fn effective_cost(&self, cost: &QuadCost) -> Result<QuadCost> {
        let k = self.baseline.gain();
        let (q, r) = (cost.q(), cost.r());
        let n0 = cost
            .cross()
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(q.nrows(), r.nrows()));
        let q_eff = q - &n0 * k - k.tr_mul(&n0.transpose()) + k.tr_mul(&(r * k));
        let q_eff = (&q_eff + q_eff.transpose()) * 0.5;
        let n_eff = n0 - k.tr_mul(r);
        let cross = (n_eff.amax() > 0.0).then_some(n_eff);
        Ok(QuadCost::with_cross(q_eff, cross, r.clone())?)
    }
}
