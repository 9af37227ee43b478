//! Split MAGPC's regret on the desk plant into burn-in, oracle truncation on
//! both sides, and policy regret on the oracle losses.

use magpc::harness::{
    measure_regret_terms, run_experiment, ControllerKind, ExperimentConfig, LrSchedule, OfflineComparator, Scenario,
};

fn main() {
    println!("{:>5} {:>9} {:>9} {:>10} {:>9} {:>10} {:>9}", "T", "burn-in", "alg trunc", "policy", "cmp trunc", "sum", "total");
    for horizon in [500, 1000, 2000, 4000] {
        let cfg = ExperimentConfig {
            horizon,
            controller: ControllerKind::Magpc,
            lr_schedule: LrSchedule::InverseSqrt,
            lr_num: 0.01,
            ..ExperimentConfig::new(Scenario::Desk)
        };
        let log = run_experiment(&cfg).unwrap();
        let r = measure_regret_terms(&log, &OfflineComparator::default()).unwrap();
        println!(
            "{horizon:>5} {:>9.5} {:>9.2e} {:>10.5} {:>9.2e} {:>10.6} {:>9.6}",
            r.burn_in, r.algorithm_truncation, r.policy_regret, r.comparator_truncation, r.sum(), r.total
        );
    }
}
