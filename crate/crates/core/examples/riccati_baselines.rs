//! LQR and H∞ state feedback for ADMIRE.

use magpc::controllers::{game_riccati, hinf_synthesize, lqr_riccati};
use magpc::lds::spectral_radius;
use magpc::systems;
use nalgebra::DMatrix;

fn main() {
    let sys = systems::admire();
    let (q, r) = (DMatrix::identity(5, 5), DMatrix::identity(4, 4));
    let lqr = lqr_riccati(&sys, &q, &r).unwrap();
    let rho = |k: &DMatrix<f64>| spectral_radius(&(sys.a() - sys.b() * k)).unwrap();
    println!("LQR: {} iterations, ρ(A − BK) = {:.4}", lqr.iterations, rho(&lqr.k));

    let hinf = hinf_synthesize(&sys, &q, &r, (1e-2, f64::INFINITY)).unwrap();
    println!("H∞: γ = {:.4}, ρ(A − BK) = {:.4}", hinf.gamma, rho(hinf.feedback.gain()));

    for gamma in [hinf.gamma * 1.5, 10.0 * hinf.gamma, 1e6] {
        if let Ok(sol) = game_riccati(&sys, &q, &r, gamma) {
            println!("γ = {gamma:>10.3}: |K_γ − K_lqr| = {:.3e}", (&sol.k - &lqr.k).amax());
        }
    }
    println!("K_lqr =\n{:.4}", lqr.k);
}
