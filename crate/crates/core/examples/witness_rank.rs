//! Pairwise Bellman-error and misfit matrices of a random class, their
//! singular values, numerical ranks and the domination check.

use witness_lab::benchmarks::random::{random_tabular_class, RandomTabular};
use witness_lab::witness_rank::{build_matrix, diagnose, MatrixKind, DEFAULT_RANK_TOL};
use witness_lab::{ModelClass, SeedStreams, TestFunctionClass};

fn main() -> witness_lab::Result<()> {
    let mut rng = SeedStreams::new(4).stream("rank-example", 0);
    let class = ModelClass::new(random_tabular_class(&RandomTabular::default(), 6, &mut rng))?;
    let truth = class.get(0);
    let f = TestFunctionClass::bellman_class(&class);
    for d in diagnose(&class, truth, &f, 1.0, DEFAULT_RANK_TOL)? {
        println!(
            "level {}: rank(E_B) = {}, rank(W) = {}, W dominates E_B: {}",
            d.level, d.bellman.rank, d.misfit.rank, d.misfit_dominates
        );
        println!("  singular values of W: {:?}", d.misfit.singular_values);
    }
    let w = build_matrix(&class, truth, 1, MatrixKind::Misfit(&f))?;
    w.write_csv(std::io::stdout())?;
    Ok(())
}
