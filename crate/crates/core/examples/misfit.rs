//! Witnessed model misfit: exact values against importance-weighted
//! estimates from uniform-action data, for several test-function classes.

use witness_lab::benchmarks::instances::sampling_benchmark;
use witness_lab::misfit::{bellman_error_exact, collect_uniform, witnessed_misfit_estimate, witnessed_misfit_exact};
use witness_lab::test_functions::build_scheffe_class;
use witness_lab::{SeedStreams, TestFunctionClass};

fn main() -> witness_lab::Result<()> {
    let (class, t) = sampling_benchmark()?;
    let truth = class.get(t);
    let roll_in = class.get(0);
    let h = 1;
    let classes = [
        ("bellman", TestFunctionClass::bellman_class(&class)),
        ("tv_ball", TestFunctionClass::tv_ball()),
        ("scheffe", build_scheffe_class(&class)?),
    ];
    let mut rng = SeedStreams::new(1).stream("misfit-example", 0);
    let data = collect_uniform(&truth.model, roll_in.policy(), h, 5_000, &mut rng)?;
    println!("target  class    exact    estimate  E_B");
    for (target_ix, target) in class.members().iter().enumerate() {
        let eb = bellman_error_exact(roll_in, target, truth, h)?;
        for (name, f) in &classes {
            let exact = witnessed_misfit_exact(roll_in, target, truth, h, f)?;
            let est = witnessed_misfit_estimate(&data, target, f)?.value;
            println!("M{target_ix}      {name:<8} {exact:<8.4} {est:<9.4} {eb:.4}");
        }
    }
    Ok(())
}
