//! ADMIRE with the fourth actuator dropping out at t = 500: MAGPC, GPC, LQR and H∞.
//!
//! Pass a disturbance profile name as the first argument (default `random_walk`).

use magpc::harness::{run_experiment, ControllerKind, ExperimentConfig, Scenario};
use magpc::lds::DisturbanceProfile;

fn main() {
    let profile: DisturbanceProfile = std::env::args()
        .nth(1)
        .as_deref()
        .unwrap_or("random_walk")
        .parse()
        .expect("unknown profile");
    println!("{:<6} {:>14} {:>14} {:>12} {:>12}", "ctrl", "pre cost", "post cost", "pre max|x|", "post max|x|");
    for controller in [ControllerKind::Magpc, ControllerKind::Gpc, ControllerKind::Lqr, ControllerKind::Hinf] {
        let cfg = ExperimentConfig {
            horizon: 2000,
            profile: profile.clone(),
            controller,
            failure: Some((4, 500)),
            ..ExperimentConfig::new(Scenario::Admire)
        };
        let log = run_experiment(&cfg).unwrap();
        println!(
            "{:<6} {:>14.4e} {:>14.4e} {:>12.3} {:>12.3}",
            controller.as_str(),
            log.cost_between(0, 500),
            log.cost_between(500, 2000),
            log.max_state_norm(0, 500),
            log.max_state_norm(500, 2000),
        );
    }
}
