//! Simulate the ADMIRE plant open loop and under LQR for each disturbance profile.

use magpc::controllers::lqr_synthesize;
use magpc::lds::{certify_stability, generate_disturbances, spectral_radius, DisturbanceProfile, QuadCost, StageCost};
use magpc::systems;
use nalgebra::DVector;

fn main() {
    let sys = systems::admire();
    let cost = QuadCost::identity(sys.state_dim(), sys.input_dim());
    let k = lqr_synthesize(&sys, cost.q(), cost.r()).expect("ADMIRE is stabilizable");
    println!("open-loop ρ(A) = {:.4}", spectral_radius(sys.a()).unwrap());
    println!("closed-loop ρ(A − BK) = {:.4}", spectral_radius(&(sys.a() - sys.b() * k.gain())).unwrap());
    if let Ok(cert) = certify_stability(&systems::desk_pair()) {
        println!("desk plant: κ = {:.3}, γ = {:.3}", cert.kappa, cert.gamma);
    }

    let horizon = 500;
    for profile in [DisturbanceProfile::Gaussian, DisturbanceProfile::RandomWalk, DisturbanceProfile::Sinusoidal] {
        let trace = generate_disturbances(&profile, 1, horizon, sys.state_dim()).unwrap();
        let nature = sys.natures_x(&trace.w).unwrap();
        let mut x = DVector::zeros(sys.state_dim());
        let mut total = 0.0;
        for w in &trace.w {
            let u = k.control(&x).unwrap();
            total += cost.eval(&x, &u);
            x = sys.step(&x, &u, w).unwrap();
        }
        println!(
            "{profile:>12}: open-loop ‖x_20‖ = {:.3e}, LQR average cost over {horizon} steps = {:.3}",
            nature[20].norm(),
            total / horizon as f64
        );
    }
}
