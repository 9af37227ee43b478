//! Three OGD players on a quadratic loss with memory. Compares the measured
//! multi-agent regret with the sum of the players' own linearized regrets.

use magpc::lds::NormalSampler;
use magpc::oco::{
    eval_multiagent_regret, multiplayer_ocom_round, BallDomain, ComparatorOracle, DecisionWindow, JointDecision,
    LearnerState, MemoryLoss, OnlineLearner, ProductDomain, QuadraticMemoryLoss, StepSchedule,
};

fn main() {
    let (k, d, h, rounds) = (3, 2, 2, 2000);
    let mut rng = NormalSampler::new(7);
    let loss = QuadraticMemoryLoss {
        weights: (0..=h).map(|_| rng.matrix(k * d, k * d)).collect(),
        targets: (0..5).map(|_| rng.vector(k * d)).collect(),
    };
    let ball = BallDomain::vector(1.0, d).unwrap();
    let domain = ProductDomain::new(vec![ball; k]);
    let mut players: Vec<LearnerState> = (0..k).map(|_| LearnerState::new(ball, StepSchedule::anytime(&ball))).collect();
    let shapes = vec![(d, 1); k];

    let mut window = DecisionWindow::new(h);
    let mut history = Vec::new();
    for t in 0..rounds {
        let played = multiplayer_ocom_round(&mut players, &mut window, |win| {
            let grads: Vec<JointDecision> =
                loss.grad(t, &win.flattened()).iter().map(|g| JointDecision::split(g, &shapes)).collect();
            (0..k).map(|i| grads.iter().map(|g| g.parts[i].clone()).collect()).collect()
        });
        // the first h rounds only fill the window
        history.push(played.map(|j| j.concat()).unwrap_or_else(|_| window.lag(0).unwrap().concat()));
    }

    let report = eval_multiagent_regret(&loss, &history, &domain, &ComparatorOracle::default()).unwrap();
    let ledger: f64 = players
        .iter()
        .enumerate()
        .map(|(i, p)| p.ledger().regret_against(&domain.block(&report.comparator.point, i)))
        .sum();
    println!("average multi-agent regret     {:.5}", report.average_regret);
    println!("sum of linearized regrets / T  {:.5}", ledger / report.rounds as f64);
    println!("comparator converged: {} (residual {:.1e})", report.comparator.converged, report.comparator.residual);
}
