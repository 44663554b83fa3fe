//! Experiment configuration files.
//!
//! One TOML document describes one experiment: where the model class comes
//! from, which test-function class to use, the algorithm parameters, the
//! seeds and where results go. Relative paths are resolved against the
//! directory of the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchmarks::random::{RandomFactored, RandomTabular};
use crate::elimination::{AlgoConfig, Mode};
use crate::error::{Error, Result};

// ── Experiment kinds ──

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Plan,
    Misfit,
    Rank,
    RunMain,
    RunDoubling,
    RunFactored,
    SeparationDemo,
    ScheffeCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Plan,
        ExperimentKind::Misfit,
        ExperimentKind::Rank,
        ExperimentKind::RunMain,
        ExperimentKind::RunDoubling,
        ExperimentKind::RunFactored,
        ExperimentKind::SeparationDemo,
        ExperimentKind::ScheffeCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Plan => "plan",
            ExperimentKind::Misfit => "misfit",
            ExperimentKind::Rank => "rank",
            ExperimentKind::RunMain => "run-main",
            ExperimentKind::RunDoubling => "run-doubling",
            ExperimentKind::RunFactored => "run-factored",
            ExperimentKind::SeparationDemo => "separation-demo",
            ExperimentKind::ScheffeCheck => "scheffe-check",
        }
    }

    /// Kinds whose every run draws samples.
    fn always_samples(self) -> bool {
        matches!(self, ExperimentKind::Misfit | ExperimentKind::SeparationDemo)
    }
}

// ── Sources ──

/// Where the model class (and the environment) comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Source {
    /// A model or class document; `truth` indexes the environment.
    File {
        path: PathBuf,
        #[serde(default)]
        truth: usize,
    },
    /// The tree-bandit family; the environment is its last member.
    MabTree { horizon: usize, actions: usize, gap: f64 },
    /// The factored separation family with `d` variables.
    Separation {
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truth: Option<usize>,
    },
    /// Random tabular class sharing an initial law; member 0 is the truth.
    Random {
        #[serde(flatten)]
        shape: RandomTabular,
        models: usize,
        seed: u64,
    },
    /// Random factored class sharing structure and reward; member 0 is the truth.
    RandomFactored {
        #[serde(flatten)]
        shape: RandomFactored,
        models: usize,
        seed: u64,
    },
    /// The fixed four-model contextual instance.
    SamplingBenchmark,
}

/// Which discriminator class to use.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunctionSpec {
    /// `{±(r + V_M)}` over the class.
    #[default]
    Bellman,
    /// All functions bounded by `bound` in sup norm.
    TvBall {
        #[serde(default = "one")]
        bound: f64,
    },
    /// The finite Scheffé-set class built from the model class.
    Scheffe,
    /// Per-variable sums (factored sources only).
    Factored,
    /// An enumerated class stored as JSON.
    File { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

// ── Experiment ──

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    /// Overrides `algo.mode` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Level for `misfit` (required) and `rank` (all levels when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    /// Samples per seed for `misfit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Roll-in model for `misfit` (defaults to the truth).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roll_in: Option<usize>,
    /// Episode budget of the profile-restricted learner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner_budget: Option<u64>,
    /// Singular-value tolerance for `rank`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    /// Output directory (the command line overrides it).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub source: Source,
    #[serde(default)]
    pub test_functions: TestFunctionSpec,
    #[serde(default)]
    pub algo: AlgoConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a file and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Source::File { path, .. } = &mut self.source {
            fix(path);
        }
        if let TestFunctionSpec::File { path } = &mut self.test_functions {
            fix(path);
        }
        if let Some(out) = &mut self.out {
            fix(out);
        }
    }

    /// The effective mode.
    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or(self.algo.mode)
    }

    /// Checks the invariants that do not depend on the subcommand.
    pub fn check(&self, kind: ExperimentKind) -> Result<()> {
        if let Some(k) = self.experiment {
            if k != kind {
                return Err(Error::Config(format!(
                    "config describes a {} experiment, not {}",
                    k.name(),
                    kind.name()
                )));
            }
        }
        self.algo.check()?;
        let sampling = self.mode() == Mode::Sampling || kind.always_samples();
        if sampling && self.seeds.is_empty() {
            return Err(Error::Config("sampling experiments need a non-empty seed list".into()));
        }
        for p in self.referenced_files() {
            if !p.exists() {
                return Err(Error::Config(format!("referenced file {} does not exist", p.display())));
            }
        }
        if kind == ExperimentKind::Misfit && (self.level.is_none() || self.samples.is_none()) {
            return Err(Error::Config("misfit experiments need `level` and `samples`".into()));
        }
        if kind == ExperimentKind::SeparationDemo && !matches!(self.source, Source::Separation { .. }) {
            return Err(Error::Config("separation-demo needs a separation source".into()));
        }
        Ok(())
    }

    fn referenced_files(&self) -> Vec<&Path> {
        let mut out = Vec::new();
        if let Source::File { path, .. } = &self.source {
            out.push(path.as_path());
        }
        if let TestFunctionSpec::File { path } = &self.test_functions {
            out.push(path.as_path());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
experiment = "run-main"
mode = "sampling"
seeds = [1, 2, 3]

[source]
kind = "mab-tree"
horizon = 3
actions = 2
gap = 0.2

[test_functions]
type = "tv_ball"

[algo]
epsilon = 0.05
n = 200
"#;

    #[test]
    fn parses_and_roundtrips() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.test_functions, TestFunctionSpec::TvBall { bound: 1.0 });
        assert_eq!(cfg.algo.n, Some(200));
        assert_eq!(cfg.mode(), Mode::Sampling);
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn flattened_random_sources_roundtrip() {
        let cfg = ExperimentConfig {
            experiment: Some(ExperimentKind::Rank),
            mode: None,
            seeds: vec![],
            level: Some(1),
            samples: None,
            roll_in: None,
            learner_budget: None,
            rank_tol: Some(1e-9),
            out: None,
            source: Source::RandomFactored {
                shape: RandomFactored::default(),
                models: 4,
                seed: 9,
            },
            test_functions: TestFunctionSpec::Factored,
            algo: AlgoConfig::default(),
        };
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_mismatched_kind() {
        assert!(ExperimentConfig::from_toml(&format!("{SAMPLE}\nbogus = 1")).is_err());
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert!(cfg.check(ExperimentKind::Plan).is_err());
        assert!(cfg.check(ExperimentKind::RunMain).is_ok());
    }

    #[test]
    fn sampling_needs_seeds() {
        let mut cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        cfg.seeds.clear();
        assert!(matches!(cfg.check(ExperimentKind::RunMain), Err(Error::Config(_))));
    }
}
