//! The optimistic elimination learner in oracle mode on the tree bandit and
//! in sampling mode on the fixed contextual instance.

use witness_lab::benchmarks::build_mab_tree_family;
use witness_lab::benchmarks::instances::sampling_benchmark;
use witness_lab::elimination::{run_main, AlgoConfig, Mode};
use witness_lab::{SeedStreams, TestFunctionClass};

fn main() -> witness_lab::Result<()> {
    let (tree, t) = build_mab_tree_family(3, 2, 0.2)?;
    let cfg = AlgoConfig {
        epsilon: 0.05,
        ..AlgoConfig::default()
    };
    let rec = run_main(&tree, tree.get(t), &TestFunctionClass::tv_ball(), &cfg, &SeedStreams::new(0).stream("run", 0))?;
    println!("oracle, tree bandit: phi = {:.3e}, round cap {}", rec.params.phi, rec.params.max_rounds);
    for r in &rec.rounds {
        println!(
            "  round {}: chose M{} (predicts {:.3}, achieves {:.3}), level {:?}, eliminated {:?}",
            r.round, r.chosen, r.predicted_value, r.estimated_value, r.level, r.eliminated
        );
    }
    println!("  output M{:?} with value {:?}", rec.output, rec.output_value);

    let (class, t) = sampling_benchmark()?;
    let f = TestFunctionClass::bellman_class(&class);
    let cfg = AlgoConfig {
        epsilon: 0.1,
        mode: Mode::Sampling,
        wrank: Some(1.0),
        ..AlgoConfig::default()
    };
    let rec = run_main(&class, class.get(t), &f, &cfg, &SeedStreams::new(0).stream("run", 0))?;
    println!(
        "sampling, contextual instance: n_e = {}, n = {}, {} rounds, {} trajectories, output M{:?} value {:?}",
        rec.params.n_e,
        rec.params.n,
        rec.rounds.len(),
        rec.total_trajectories,
        rec.output,
        rec.output_value
    );
    rec.write_rounds_csv(std::io::stdout())?;
    Ok(())
}
