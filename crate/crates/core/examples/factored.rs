//! Factored models: expansion, the explicit low-rank factorisation of the
//! factored misfit, and the factored elimination learner on a CPT grid.

use witness_lab::benchmarks::random::{random_factored, random_factored_class, RandomFactored};
use witness_lab::elimination::{cpt_grid_class, run_factored, AlgoConfig, Mode};
use witness_lab::witness_rank::{factored_factorization, DEFAULT_RANK_TOL};
use witness_lab::{expand, ModelClass, SeedStreams};

fn main() -> witness_lab::Result<()> {
    let spec = RandomFactored::default();
    let mut rng = SeedStreams::new(2).stream("factored-example", 0);
    let class = ModelClass::from_factored(random_factored_class(&spec, 6, &mut rng))?;
    for h in 0..class.horizon() {
        let f = factored_factorization(&class, class.get(0), h)?;
        println!(
            "level {h}: dim {} rank {} beta {:.3}",
            f.dim,
            f.matrix.rank(DEFAULT_RANK_TOL),
            f.beta
        );
    }

    // A single binary variable with one parent and a coarse CPT grid.
    let base = random_factored(
        &RandomFactored {
            horizon: 1,
            actions: 2,
            d: 1,
            num_values: 2,
            max_parents: 1,
        },
        &mut rng,
    );
    println!("expanded base model has {} level-0 states", expand(&base)?.states(0));
    let grid = cpt_grid_class(&base, 2, 4096)?;
    let truth_ix = grid.len() / 2;
    let class = ModelClass::from_factored(grid)?;
    let cfg = AlgoConfig {
        epsilon: 0.2,
        mode: Mode::Sampling,
        n_multiplier: 0.05,
        ..AlgoConfig::default()
    };
    let rec = run_factored(&class, class.get(truth_ix), &cfg, &SeedStreams::new(0).stream("run", 0))?;
    println!(
        "grid of {} models: {} rounds, {} trajectories, output value {:?} (v* = {:.3})",
        class.len(),
        rec.rounds.len(),
        rec.total_trajectories,
        rec.output_value,
        class.get(truth_ix).value()
    );
    Ok(())
}
