//! Exact planning: optimal values, greedy policy and occupancy measures of
//! the tree-bandit environment, plus a Monte Carlo check of the value.

use witness_lab::benchmarks::build_mab_tree_family;
use witness_lab::{occupancy, sample_trajectory, SeedStreams};

fn main() -> witness_lab::Result<()> {
    let (class, truth) = build_mab_tree_family(3, 2, 0.2)?;
    let env = class.get(truth);
    println!("v* = {}", env.value());
    for h in 0..env.model.horizon() {
        let actions: Vec<usize> = (0..env.model.states(h)).map(|x| env.policy().action(h, x).unwrap_or(0)).collect();
        let occ = occupancy(&env.model, env.policy(), h)?;
        println!("level {h}: greedy actions {actions:?}, occupancy {occ:?}");
    }

    let mut rng = SeedStreams::new(0).stream("plan-example", 0);
    let n = 20_000;
    let mean: f64 = (0..n)
        .map(|_| sample_trajectory(&env.model, env.policy(), &mut rng).total_reward())
        .sum::<f64>()
        / n as f64;
    println!("Monte Carlo return over {n} episodes: {mean:.4}");
    Ok(())
}
