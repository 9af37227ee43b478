//! Without seeing the other agents' controls, agent 1 cannot tell the two
//! adversarial trajectories apart, so some trajectory costs it at least 1/4.

use magpc::harness::{demo_shared_controls, ConstantStrategy, OgdStrategy, Strategy};

fn main() {
    let mut strategies: Vec<Box<dyn Strategy>> = vec![
        Box::new(ConstantStrategy(0.0)),
        Box::new(ConstantStrategy(0.5)),
        Box::new(ConstantStrategy(1.0)),
        Box::new(OgdStrategy::default()),
    ];
    for s in strategies.iter_mut() {
        let r = demo_shared_controls(s.as_mut(), 1000);
        println!(
            "{:<14} regret with u² ≡ 0: {:.4}   with u² ≡ 1: {:.4}   max: {:.4}",
            r.strategy, r.regrets[0], r.regrets[1], r.max_regret
        );
    }
}
