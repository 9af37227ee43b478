//! Two players sharing one convex loss can each have negative regret while
//! the pair does badly; OGD players fed linearized losses do not.

use magpc::harness::demo_oco_counterexample;

fn main() {
    for t in [100, 1000, 10_000] {
        let r = demo_oco_counterexample(t);
        println!(
            "T = {t:>5}  scripted: joint loss {:.3}, player regrets {:+.3} {:+.3}, multi-agent regret {:.3}  |  OGD multi-agent regret {:.5}",
            r.scripted.joint_losses[0],
            r.scripted.player_regret[0],
            r.scripted.player_regret[1],
            r.scripted.multi_agent_regret,
            r.ogd.multi_agent_regret,
        );
    }
    let r = demo_oco_counterexample(10);
    for (t, (a, b)) in r.ogd.plays.iter().enumerate() {
        println!("OGD round {t}: ({a:+.4}, {b:+.4})");
    }
}
