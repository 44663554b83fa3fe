//! The separation family: profile equivalence with the tabular twins, state
//! recovery under the over-parameterised class, and model-based versus
//! profile-restricted learning on planted paths.

use witness_lab::benchmarks::profile::{overparam_recovery, profile_equivalence_report};
use witness_lab::elimination::{AlgoConfig, Mode};
use witness_lab::harness::separation_rows;

fn main() -> witness_lab::Result<()> {
    for d in 1..=3 {
        let r = profile_equivalence_report(d)?;
        println!("d = {d}: {} sequences, equivalent: {}", r.sequences_checked, r.equivalent);
    }
    let (recovered, total) = overparam_recovery(2)?;
    println!("over-parameterised class recovers {recovered}/{total} reward-level states");

    let d = 5;
    let algo = AlgoConfig {
        epsilon: 0.1,
        mode: Mode::Sampling,
        n_e: Some(2),
        n: Some(2),
        ..AlgoConfig::default()
    };
    let seeds: Vec<u64> = (0..20).collect();
    let rows = separation_rows(d, &algo, 4 << d, &seeds)?;
    for learner in ["model_based", "profile"] {
        let t: Vec<u64> = rows.iter().filter(|r| r.learner == learner).map(|r| r.trajectories).collect();
        let mean = t.iter().sum::<u64>() as f64 / t.len() as f64;
        println!("{learner:<12} mean trajectories {mean:.2} over {} seeds: {t:?}", t.len());
    }
    Ok(())
}
