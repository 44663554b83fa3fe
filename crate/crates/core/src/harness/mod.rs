//! Experiment configuration, seeded orchestration and result emission.
//!
//! Every experiment is described by a TOML file (see [`config`]) and run by
//! [`run`]. Seeds are dispatched to a rayon pool whose size comes from the
//! `WITNESS_LAB_WORKERS` environment variable; each seed owns its random
//! streams, results are gathered in seed order, and no output carries a
//! timestamp, so identical inputs give byte-identical files.

pub mod config;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind, Source, TestFunctionSpec};
pub use run::{exit_code, load_source, run, separation_rows, test_class, ErrorReport, Loaded, Overrides, RunSummary, WORKERS_ENV};
