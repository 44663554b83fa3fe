//! Instance generators: random tabular and factored classes, the tree-bandit
//! lower-bound family, the factored separation family and a small fixed
//! instance for sampling experiments.

pub mod instances;
pub mod mab_tree;
pub mod profile;
pub mod random;
pub mod separation;

pub use mab_tree::build_mab_tree_family;
pub use profile::{g_profile, LearnerConfig, profile_equivalence_check, profile_restricted_learner, GClass, GProfile};
pub use separation::{build_overparam_class, build_separation_family, build_tilde_family};
