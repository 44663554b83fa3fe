//! The doubling schedule: no witness rank or κ is supplied; epochs double
//! the guess of `w/κ` until an inner run returns a policy.

use witness_lab::benchmarks::instances::sampling_benchmark;
use witness_lab::elimination::{run_doubling, AlgoConfig, Mode};
use witness_lab::{SeedStreams, TestFunctionClass};

fn main() -> witness_lab::Result<()> {
    let (class, t) = sampling_benchmark()?;
    let f = TestFunctionClass::bellman_class(&class);
    let cfg = AlgoConfig {
        epsilon: 0.1,
        mode: Mode::Sampling,
        ..AlgoConfig::default()
    };
    for seed in 0..3 {
        let rec = run_doubling(&class, class.get(t), &f, &cfg, &SeedStreams::new(seed).stream("run", 0))?;
        println!("seed {seed}: iterations per epoch {:?}", rec.iterations_per_epoch);
        for inner in &rec.inner {
            println!(
                "  epoch {} iteration {}: kappa {}, w {}, n {}, fault {:?}",
                inner.epoch, inner.iteration, inner.params.kappa, inner.params.wrank, inner.params.n, inner.fault
            );
        }
        println!("  output M{:?}, value {:?}, {} trajectories", rec.output, rec.output_value, rec.total_trajectories);
    }
    Ok(())
}
