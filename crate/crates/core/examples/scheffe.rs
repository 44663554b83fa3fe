//! The finite Scheffé-set class attains the same misfit as the whole TV ball.

use witness_lab::benchmarks::random::{random_tabular_class, RandomTabular};
use witness_lab::test_functions::build_scheffe_class;
use witness_lab::witness_rank::{build_matrix, MatrixKind};
use witness_lab::{ModelClass, SeedStreams, TestFunctionClass};

fn main() -> witness_lab::Result<()> {
    let mut rng = SeedStreams::new(9).stream("scheffe-example", 0);
    let class = ModelClass::new(random_tabular_class(&RandomTabular::default(), 3, &mut rng))?;
    let scheffe = build_scheffe_class(&class)?;
    let tv = TestFunctionClass::tv_ball();
    println!("{} Scheffé functions for {} models", scheffe.functions().map_or(0, <[_]>::len), class.len());
    let truth = class.get(0);
    for h in 0..class.horizon() {
        let a = build_matrix(&class, truth, h, MatrixKind::Misfit(&scheffe))?;
        let b = build_matrix(&class, truth, h, MatrixKind::Misfit(&tv))?;
        let mut worst = 0.0f64;
        for i in 0..class.len() {
            for j in 0..class.len() {
                worst = worst.max((a.get(i, j) - b.get(i, j)).abs());
            }
        }
        println!("level {h}: max |W_scheffe - W_tv| = {worst:.2e}");
    }
    Ok(())
}
