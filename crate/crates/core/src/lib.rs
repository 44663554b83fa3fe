//! Model-based exploration in layered decision processes.
//!
//! The crate is organised around a small number of pieces:
//!
//! - [`cdp`] and [`factored`]: finite layered MDPs, exact planning, policy
//!   evaluation, occupancy measures, trajectory sampling and the expansion of
//!   factored transition models into tabular ones.
//! - [`test_functions`]: the discriminator classes that define integral
//!   probability metrics between a candidate model and the environment.
//! - [`misfit`]: exact and empirical witnessed model misfit, average Bellman
//!   error and the factored (per-variable) misfit.
//! - [`witness_rank`]: pairwise misfit / Bellman-error matrices, numerical
//!   ranks and the explicit factorisation available for factored models.
//! - [`elimination`]: the optimistic elimination learner, its doubling-trick
//!   wrapper and the factored variant.
//! - [`benchmarks`]: lower-bound constructions, separation families,
//!   G-profiles and random instance generators.
//! - [`harness`]: configuration files, seeded experiment orchestration and
//!   result emission used by the `witness-lab` binary.
//!
//! Levels are 0-based throughout: a model with horizon `H` has decision
//! levels `0..H` and a terminal level `H`.

pub mod benchmarks;
pub mod cdp;
pub mod elimination;
pub mod error;
pub mod factored;
pub mod harness;
pub mod io;
pub mod misfit;
pub mod rng;
pub mod test_functions;
pub mod witness_rank;

pub use cdp::{
    occupancy, plan, policy_value, sample_trajectory, validate, Candidate, ModelClass, PlanResult,
    Policy, RewardDist, SparseDist, TabularCdp, Trajectory,
};
pub use error::{Error, Result, Violation};
pub use factored::{expand, FactoredMdp, FactoredReward, FactoredStructure};
pub use rng::{SeedStreams, StreamId, StreamRng};
pub use test_functions::{TestFunctionClass, WitnessFunction};

/// Absolute tolerance used for probability normalisation checks.
pub const PROB_TOL: f64 = 1e-12;
