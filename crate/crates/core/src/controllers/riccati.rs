use nalgebra::DMatrix;

use super::{ControlError, Result};
use crate::lds::{spectral_radius, LinearSystem};
use crate::policies::LinearFeedback;

const MAX_ITERS: usize = 100_000;
const REL_TOL: f64 = 1e-10;
/// Bisection stops once the bracket is this narrow.
pub const GAMMA_TOL: f64 = 1e-3;

/// Converged Riccati solution and its state-feedback gain.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HinfSolution {
    pub feedback: LinearFeedback,
    pub gamma: f64,
    pub p: DMatrix<f64>,
}

fn check_weights(sys: &LinearSystem, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<()> {
    let (dx, du) = (sys.state_dim(), sys.input_dim());
    if q.shape() != (dx, dx) || r.shape() != (du, du) {
        return Err(ControlError::Dimension(format!(
            "weights must be {dx}x{dx} and {du}x{du}"
        )));
    }
    Ok(())
}

fn converged(next: &DMatrix<f64>, prev: &DMatrix<f64>) -> bool {
    (next - prev).norm() <= REL_TOL * next.norm().max(1e-300)
}

/// Fixed-point iteration on the discrete algebraic Riccati equation from `P = Q`.
pub fn lqr_riccati(sys: &LinearSystem, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<RiccatiSolution> {
    check_weights(sys, q, r)?;
    let (a, b) = (sys.a(), sys.b());
    let gain = |p: &DMatrix<f64>| -> Option<DMatrix<f64>> {
        let s = r + b.tr_mul(&(p * b));
        s.cholesky().map(|c| c.solve(&b.tr_mul(&(p * a))))
    };
    let mut p = q.clone();
    for it in 1..=MAX_ITERS {
        let k = gain(&p).ok_or(ControlError::NotStabilizable { iterations: it })?;
        let pa = &p * a;
        let mut next = q + a.tr_mul(&pa) - a.tr_mul(&(&p * b)) * &k;
        next = (&next + next.transpose()) * 0.5;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(ControlError::NotStabilizable { iterations: it });
        }
        if converged(&next, &p) {
            let k = gain(&next).ok_or(ControlError::NotStabilizable { iterations: it })?;
            return Ok(RiccatiSolution { p: next, k, iterations: it });
        }
        p = next;
    }
    Err(ControlError::NotStabilizable { iterations: MAX_ITERS })
}

/// Infinite-horizon LQR gain, verified stabilizing.
pub fn lqr_synthesize(sys: &LinearSystem, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<LinearFeedback> {
    let sol = lqr_riccati(sys, q, r)?;
    stabilizing(sys, sol.k)
}

fn stabilizing(sys: &LinearSystem, k: DMatrix<f64>) -> Result<LinearFeedback> {
    let rho = spectral_radius(&(sys.a() - sys.b() * &k))?;
    if rho >= 1.0 {
        return Err(ControlError::NotStabilizing(rho));
    }
    Ok(LinearFeedback::new(k))
}

/// Game Riccati iteration `P ← Q + AᵀPΛ⁻¹A`, `Λ = I + (BR⁻¹Bᵀ − γ⁻²I)P`.
///
/// `gamma = ∞` recovers the LQR recursion. Fails unless the iteration
/// converges with `I − γ⁻²P ≻ 0`.
pub fn game_riccati(sys: &LinearSystem, q: &DMatrix<f64>, r: &DMatrix<f64>, gamma: f64) -> Result<RiccatiSolution> {
    check_weights(sys, q, r)?;
    let dx = sys.state_dim();
    let (a, b) = (sys.a(), sys.b());
    let inv_g2 = if gamma.is_infinite() { 0.0 } else { 1.0 / (gamma * gamma) };
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| ControlError::Dimension("R is singular".into()))?;
    let coupling = b * &r_inv * b.transpose() - DMatrix::identity(dx, dx) * inv_g2;
    let ident = DMatrix::identity(dx, dx);
    let solve = |p: &DMatrix<f64>| -> Option<DMatrix<f64>> {
        (&ident + &coupling * p).lu().solve(a)
    };
    let fail = |iterations| ControlError::NotStabilizable { iterations };
    let mut p = q.clone();
    for it in 1..=MAX_ITERS {
        let lam_a = solve(&p).ok_or(fail(it))?;
        let mut next = q + a.tr_mul(&(&p * lam_a));
        next = (&next + next.transpose()) * 0.5;
        if next.iter().any(|v| !v.is_finite()) || next.norm() > 1e12 {
            return Err(fail(it));
        }
        if converged(&next, &p) {
            let margin = (&ident - &next * inv_g2).symmetric_eigenvalues().min();
            if margin <= 0.0 {
                return Err(fail(it));
            }
            let lam_a = solve(&next).ok_or(fail(it))?;
            let k = &r_inv * b.transpose() * &next * lam_a;
            return Ok(RiccatiSolution { p: next, k, iterations: it });
        }
        p = next;
    }
    Err(fail(MAX_ITERS))
}

fn feasible(sys: &LinearSystem, q: &DMatrix<f64>, r: &DMatrix<f64>, gamma: f64) -> Option<HinfSolution> {
    let sol = game_riccati(sys, q, r, gamma).ok()?;
    let feedback = stabilizing(sys, sol.k).ok()?;
    Some(HinfSolution { feedback, gamma, p: sol.p })
}

/// Smallest feasible attenuation level in `gamma_range`, found by bisection.
///
/// An infinite upper end is replaced by the first feasible level found by doubling.
pub fn hinf_synthesize(
    sys: &LinearSystem,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    gamma_range: (f64, f64),
) -> Result<HinfSolution> {
    check_weights(sys, q, r)?;
    let (lo_in, hi_in) = gamma_range;
    if !(lo_in > 0.0 && hi_in > lo_in) {
        return Err(ControlError::Config(format!("invalid attenuation range [{lo_in}, {hi_in}]")));
    }
    let infeasible = || ControlError::Infeasible { lo: lo_in, hi: hi_in };
    let (mut hi, mut best) = if hi_in.is_finite() {
        (hi_in, feasible(sys, q, r, hi_in).ok_or_else(infeasible)?)
    } else {
        let mut g = (2.0 * lo_in).max(1.0);
        loop {
            if let Some(sol) = feasible(sys, q, r, g) {
                break (g, sol);
            }
            g *= 2.0;
            if g > 1e12 {
                return Err(infeasible());
            }
        }
    };
    if let Some(sol) = feasible(sys, q, r, lo_in) {
        return Ok(sol);
    }
    let mut lo = lo_in;
    while hi - lo > GAMMA_TOL {
        let mid = 0.5 * (lo + hi);
        match feasible(sys, q, r, mid) {
            Some(sol) => {
                hi = mid;
                best = sol;
            }
            None => lo = mid,
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems;

    fn one(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    /// Positive root of `b²p² + (r − q b² − a² r)p − q r = 0`.
    fn scalar_lqr_oracle(a: f64, b: f64, q: f64, r: f64) -> (f64, f64) {
        let qa = b * b;
        let qb = r - q * b * b - a * a * r;
        let qc = -q * r;
        let p = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
        (p, b * p * a / (r + b * b * p))
    }

    #[test]
    fn trivial_lqr() {
        let sys = systems::scalar(0.0, &[1.0]);
        let sol = lqr_riccati(&sys, &one(1.0), &one(1.0)).unwrap();
        assert!((sol.p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(sol.k[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn scalar_lqr_matches_quadratic_formula() {
        let sys = systems::scalar(0.5, &[1.0]);
        let sol = lqr_riccati(&sys, &one(1.0), &one(1.0)).unwrap();
        let (p, k) = scalar_lqr_oracle(0.5, 1.0, 1.0, 1.0);
        assert!((p - 1.1328).abs() < 1e-4);
        assert!((sol.p[(0, 0)] - p).abs() < 1e-9);
        assert!((sol.k[(0, 0)] - k).abs() < 1e-9);
    }

    #[test]
    fn admire_lqr_stabilizes() {
        let sys = systems::admire();
        let k = lqr_synthesize(&sys, &DMatrix::identity(5, 5), &DMatrix::identity(4, 4)).unwrap();
        let rho = spectral_radius(&(sys.a() - sys.b() * k.gain())).unwrap();
        assert!(rho < 1.0);
    }

    #[test]
    fn game_riccati_infinite_gamma_is_lqr() {
        let sys = systems::admire();
        let (q, r) = (DMatrix::identity(5, 5), DMatrix::identity(4, 4));
        let lqr = lqr_riccati(&sys, &q, &r).unwrap();
        let game = game_riccati(&sys, &q, &r, f64::INFINITY).unwrap();
        assert!((lqr.k - game.k).amax() < 1e-6);
    }

    #[test]
    fn scalar_hinf_critical_level() {
        // a = 0.5, b = q = r = 1: s p² + (1 − s − a²) p − 1 = 0 with s = 1 − g,
        // and I − g p ≻ 0 fails exactly when g ≥ 0.8.
        let sys = systems::scalar(0.5, &[1.0]);
        let critical = 1.0 / 0.8f64.sqrt();
        assert!(game_riccati(&sys, &one(1.0), &one(1.0), 1.0).is_err());
        let g2 = 0.25;
        let s = 1.0 - g2;
        let p_oracle = (-(1.0 - s - 0.25) + ((1.0 - s - 0.25f64).powi(2) + 4.0 * s).sqrt()) / (2.0 * s);
        let sol = game_riccati(&sys, &one(1.0), &one(1.0), 2.0).unwrap();
        assert!((sol.p[(0, 0)] - p_oracle).abs() < 1e-8);
        let hinf = hinf_synthesize(&sys, &one(1.0), &one(1.0), (0.5, 100.0)).unwrap();
        assert!(hinf.gamma >= critical - 1e-9 && hinf.gamma <= critical + 2.0 * GAMMA_TOL, "gamma {}", hinf.gamma);
        assert!(matches!(
            hinf_synthesize(&sys, &one(1.0), &one(1.0), (0.5, 1.0)),
            Err(ControlError::Infeasible { .. })
        ));
    }

    #[test]
    fn admire_hinf_stabilizes() {
        let sys = systems::admire();
        let sol = hinf_synthesize(&sys, &DMatrix::identity(5, 5), &DMatrix::identity(4, 4), (0.1, f64::INFINITY)).unwrap();
        let rho = spectral_radius(&(sys.a() - sys.b() * sol.feedback.gain())).unwrap();
        assert!(rho < 1.0);
    }
}
