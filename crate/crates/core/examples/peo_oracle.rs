//! Evaluate one agent's policy oracle and check it against a rollout of the
//! real plant from `x_{t−h}`.

use magpc::lds::{generate_disturbances, DisturbanceProfile, NormalSampler, QuadCost, StageCost};
use magpc::peo::{build_markov, default_horizon, PeoContext};
use magpc::policies::stack_window;
use magpc::systems;
use nalgebra::{DMatrix, DVector};

fn main() {
    let sys = systems::desk_pair();
    let cost = QuadCost::identity(2, 2);
    let m = 3;
    let h = default_horizon(1_000_000, 0.7);
    let t = 60;
    let w = generate_disturbances(&DisturbanceProfile::Gaussian, 3, t + 1, 2).unwrap().w;
    let mut rng = NormalSampler::new(3);

    // both agents play a fixed DAC policy; record what happened
    let fixed = [rng.matrix(1, 2 * m) * 0.3, rng.matrix(1, 2 * m) * 0.3];
    let mut x = DVector::zeros(2);
    let (mut states, mut controls) = (vec![x.clone()], Vec::new());
    for s in 0..=t {
        let win = stack_window(&w, s, m, 2).unwrap();
        let u = DVector::from_vec(vec![(&fixed[0] * &win)[0], (&fixed[1] * &win)[0]]);
        x = sys.step(&x, &u, &w[s]).unwrap();
        controls.push(u);
        states.push(x.clone());
    }

    let markov = build_markov(&sys, h, None).unwrap();
    let nature = sys.natures_x(&w).unwrap();
    let ctx = PeoContext { markov: &markov, cost: &cost, t, m, nature: &nature[t], controls: &controls };

    let candidate: Vec<DMatrix<f64>> = vec![rng.matrix(1, 2 * m) * 0.5; h + 1];
    let oracle = ctx.local_eval(0, &w, &candidate).unwrap();

    let regen = |s: usize| {
        let mut u = controls[s].clone();
        u[0] = (&candidate[t - s] * stack_window(&w, s, m, 2).unwrap())[0];
        u
    };
    let mut y = states[t - h].clone();
    for s in t - h..t {
        y = sys.step(&y, &regen(s), &w[s]).unwrap();
    }
    let rollout = cost.eval(&y, &regen(t));
    println!("h = {h}: oracle {oracle:.10}, rollout {rollout:.10}, gap {:.2e}", (oracle - rollout).abs());

    let grad = ctx.local_grad(0, &w, &candidate).unwrap();
    let norm: f64 = grad.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
    println!("gradient norm over the window: {norm:.5}");
}
