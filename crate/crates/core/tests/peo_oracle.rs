mod common;

use common::{brute_force, Instance};
use magpc::lds::{NormalSampler, QuadCost, StageCost};
use magpc::peo::{build_markov, PeoContext};
use magpc::policies::stack_window;
use nalgebra::{DMatrix, DVector};

#[test]
fn local_oracle_matches_brute_force_rollout() {
    for seed in 0..30 {
        let rho = 0.3 + 0.6 * NormalSampler::new(1000 + seed).uniform();
        let inst = Instance::random(seed, rho, None);
        let mut rng = NormalSampler::new(seed + 77);
        for agent in 0..inst.sys.agents() {
            let thetas = inst.random_thetas(&mut rng, agent);
            let peo = inst.ctx().local_eval(agent, &inst.w, &thetas).unwrap();
            let brute = brute_force(&inst.sys, &inst.cost, &inst.w, &inst.played, agent, &thetas, inst.t, inst.m);
            assert!((peo - brute).abs() <= 1e-6, "seed {seed}: {peo} vs {brute}");
        }
    }
}

#[test]
fn long_horizon_half_contraction() {
    let inst = Instance::random(5, 0.5, Some(40));
    let mut rng = NormalSampler::new(3);
    let thetas = inst.random_thetas(&mut rng, 0);
    let peo = inst.ctx().local_eval(0, &inst.w, &thetas).unwrap();
    let brute = brute_force(&inst.sys, &inst.cost, &inst.w, &inst.played, 0, &thetas, inst.t, inst.m);
    assert!((peo - brute).abs() <= 1e-6);
}

#[test]
fn played_policies_reproduce_the_realized_cost_up_to_truncation() {
    let inst = Instance::random(11, 0.6, None);
    let t = inst.t;
    for agent in 0..inst.sys.agents() {
        let window: Vec<DMatrix<f64>> = (0..=inst.h).map(|r| inst.played.thetas[t - r][agent].clone()).collect();
        let peo = inst.ctx().local_eval(agent, &inst.w, &window).unwrap();
        let realized = inst.cost.eval(&inst.played.states[t], &inst.played.controls[t]);
        assert!((peo - realized).abs() <= 1e-6 * realized.max(1.0));
    }
}

#[test]
fn gradient_matches_central_differences() {
    for seed in 0..20 {
        let inst = Instance::random(seed, 0.7, Some(8));
        let mut rng = NormalSampler::new(seed + 500);
        let agent = inst.sys.agents() - 1;
        let thetas = inst.random_thetas(&mut rng, agent);
        let ctx = inst.ctx();
        let grad = ctx.local_grad(agent, &inst.w, &thetas).unwrap();
        let step = 1e-5;
        let (mut num, mut den) = (0.0_f64, 0.0_f64);
        for r in 0..thetas.len() {
            for j in 0..thetas[r].len() {
                let mut plus = thetas.clone();
                let mut minus = thetas.clone();
                plus[r][j] += step;
                minus[r][j] -= step;
                let fd = (ctx.local_eval(agent, &inst.w, &plus).unwrap() - ctx.local_eval(agent, &inst.w, &minus).unwrap())
                    / (2.0 * step);
                num += (fd - grad[r][j]).powi(2);
                den += grad[r][j].powi(2);
            }
        }
        assert!(num.sqrt() <= 1e-5 * den.sqrt().max(1e-8), "seed {seed}");
    }
}

fn flatten(blocks: &[DMatrix<f64>]) -> DVector<f64> {
    DVector::from_iterator(blocks.iter().map(|b| b.len()).sum(), blocks.iter().flat_map(|b| b.iter().copied()))
}

fn unflatten(v: &DVector<f64>, like: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let mut off = 0;
    like.iter()
        .map(|b| {
            let out = DMatrix::from_column_slice(b.nrows(), b.ncols(), &v.as_slice()[off..off + b.len()]);
            off += b.len();
            out
        })
        .collect()
}

#[test]
fn gradient_vanishes_at_the_normal_equation_solution() {
    let inst = Instance::random(21, 0.6, Some(4));
    let ctx = inst.ctx();
    let zeros: Vec<DMatrix<f64>> = inst.random_thetas(&mut NormalSampler::new(0), 0).iter().map(|b| b * 0.0).collect();
    let grad_at = |v: &DVector<f64>| flatten(&ctx.local_grad(0, &inst.w, &unflatten(v, &zeros)).unwrap());
    let n = flatten(&zeros).len();
    let b = grad_at(&DVector::zeros(n));
    // ∇ℓ(v) = 2Hv + b is affine, so its columns give 2H
    let mut two_h = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        two_h.set_column(j, &(grad_at(&e) - &b));
    }
    let star = two_h.clone().svd(true, true).solve(&(-&b), 1e-12).unwrap();
    assert!(grad_at(&star).norm() <= 1e-8 * b.norm().max(1.0));
}

#[test]
fn joint_oracle_is_convex() {
    let inst = Instance::random(8, 0.7, Some(6));
    let ctx = inst.ctx();
    let k = inst.sys.agents();
    let signals: Vec<&[DVector<f64>]> = vec![&inst.w; k];
    let mut rng = NormalSampler::new(99);
    for _ in 0..1000 {
        let a: Vec<Vec<DMatrix<f64>>> = (0..k).map(|i| inst.random_thetas(&mut rng, i)).collect();
        let b: Vec<Vec<DMatrix<f64>>> = (0..k).map(|i| inst.random_thetas(&mut rng, i)).collect();
        let mid: Vec<Vec<DMatrix<f64>>> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p + q) * 0.5).collect())
            .collect();
        let fa = ctx.joint_eval(&signals, &a).unwrap();
        let fb = ctx.joint_eval(&signals, &b).unwrap();
        let fm = ctx.joint_eval(&signals, &mid).unwrap();
        assert!(fm <= 0.5 * (fa + fb) + 1e-10);
    }
}

#[test]
fn local_equals_joint_with_recorded_windows() {
    let inst = Instance::random(13, 0.6, Some(6));
    let k = inst.sys.agents();
    let t = inst.t;
    let recorded: Vec<Vec<DMatrix<f64>>> = (0..k)
        .map(|i| (0..=inst.h).map(|r| inst.played.thetas[t - r][i].clone()).collect())
        .collect();
    let signals: Vec<&[DVector<f64>]> = vec![&inst.w; k];
    let mut rng = NormalSampler::new(4);
    for agent in 0..k {
        let mine = inst.random_thetas(&mut rng, agent);
        let mut joint = recorded.clone();
        joint[agent] = mine.clone();
        let local = inst.ctx().local_eval(agent, &inst.w, &mine).unwrap();
        let full = inst.ctx().joint_eval(&signals, &joint).unwrap();
        assert!((local - full).abs() <= 1e-10 * local.abs().max(1.0));
    }
}

#[test]
fn counterfactual_state_is_additive_over_agents() {
    let inst = Instance::random(17, 0.8, Some(5));
    let (sys, t, m, h) = (&inst.sys, inst.t, inst.m, inst.h);
    let mut rng = NormalSampler::new(6);
    let k = sys.agents();
    let thetas: Vec<Vec<DMatrix<f64>>> = (0..k).map(|i| inst.random_thetas(&mut rng, i)).collect();
    let candidates: Vec<_> = (0..k)
        .map(|i| magpc::peo::Candidate { agent: i, signal: &inst.w, thetas: &thetas[i] })
        .collect();
    let (x, _) = inst.ctx().counterfactual_point(&candidates).unwrap();
    // explicit powers of A, independent of the operator's cached blocks
    let mut expect = inst.xnat[t].clone();
    for i in 0..k {
        let bi: DMatrix<f64> = sys.b_block(i).unwrap().clone();
        let mut power = DMatrix::<f64>::identity(sys.state_dim(), sys.state_dim());
        for r in 1..=h {
            let u = &thetas[i][r] * stack_window(&inst.w, t - r, m, sys.state_dim()).unwrap();
            expect += &power * &bi * u;
            power = sys.a() * power;
        }
    }
    assert!((x - expect).amax() <= 1e-12 * inst.xnat[t].amax().max(1.0));
}

#[test]
fn zero_policies_without_other_controls_cost_natures_x() {
    let inst = Instance::random(2, 0.5, Some(3));
    let zeros: Vec<Vec<DMatrix<f64>>> = (0..inst.sys.agents())
        .map(|i| inst.random_thetas(&mut NormalSampler::new(0), i).iter().map(|b| b * 0.0).collect())
        .collect();
    let signals: Vec<&[DVector<f64>]> = vec![&inst.w; inst.sys.agents()];
    let v = inst.ctx().joint_eval(&signals, &zeros).unwrap();
    let expect = inst.cost.eval(&inst.xnat[inst.t], &DVector::zeros(inst.sys.input_dim()));
    assert!((v - expect).abs() <= 1e-12 * expect.max(1.0));
}

#[test]
fn oracle_ignores_how_other_controls_were_produced() {
    // same recorded values, different generating policies: only values enter
    let inst = Instance::random(23, 0.6, Some(4));
    if inst.sys.agents() < 2 {
        return;
    }
    let mut rng = NormalSampler::new(8);
    let thetas = inst.random_thetas(&mut rng, 0);
    let a = inst.ctx().local_eval(0, &inst.w, &thetas).unwrap();
    let copy: Vec<DVector<f64>> = inst.played.controls.iter().map(|u| u.map(|v| v)).collect();
    let ctx = PeoContext { controls: &copy, ..inst.ctx() };
    assert_eq!(a, ctx.local_eval(0, &inst.w, &thetas).unwrap());
}

#[test]
fn truncation_error_decays_like_rho_to_the_h() {
    for a in [0.7, 0.8] {
        let sys = magpc::systems::scalar(a, &[1.0]);
        let cost = QuadCost::identity(1, 1);
        let horizon = 400;
        let w = vec![DVector::from_element(1, 1.0); horizon];
        let m = 2;
        let theta = DMatrix::from_row_slice(1, 2, &[-0.3, 0.1]);
        let mut x = DVector::zeros(1);
        let (mut states, mut controls) = (vec![x.clone()], Vec::new());
        for t in 0..horizon {
            let u = &theta * stack_window(&w, t, m, 1).unwrap();
            x = sys.step(&x, &u, &w[t]).unwrap();
            controls.push(u);
            states.push(x.clone());
        }
        let xnat = sys.natures_x(&w).unwrap();
        let t = horizon - 1;
        let realized = cost.eval(&states[t], &controls[t]);
        let hs = [5usize, 10, 20, 40];
        let logs: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let markov = build_markov(&sys, h, None).unwrap();
                let ctx = PeoContext { markov: &markov, cost: &cost, t, m, nature: &xnat[t], controls: &controls };
                let v = ctx.local_eval(0, &w, &vec![theta.clone(); h + 1]).unwrap();
                (v - realized).abs().ln()
            })
            .collect();
        let xs: Vec<f64> = hs.iter().map(|&h| h as f64).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 4.0, logs.iter().sum::<f64>() / 4.0);
        let slope = xs.iter().zip(&logs).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope - a.ln()).abs() <= 0.1 * a.ln().abs(), "a = {a}: slope {slope}");
    }
}
