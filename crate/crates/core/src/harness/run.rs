//! Experiment execution and result emission.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::benchmarks::instances::sampling_benchmark;
use crate::benchmarks::mab_tree::build_mab_tree_family;
use crate::benchmarks::profile::{profile_equivalence_check, profile_restricted_learner, GClass, LearnerConfig};
use crate::benchmarks::random::{random_factored_class, random_tabular_class};
use crate::benchmarks::separation::build_separation_family;
use crate::cdp::{Candidate, ModelClass, TabularCdp};
use crate::elimination::{run_doubling, run_factored, run_main, AlgoConfig, DoublingRecord, Mode, RunRecord};
use crate::error::{Error, Result};
use crate::io::{parse_model, ModelFile};
use crate::misfit::{
    collect_uniform, factored_misfit_estimate, factored_misfit_exact, witnessed_misfit_estimate, witnessed_misfit_exact,
};
use crate::rng::{SeedStreams, StreamRng};
use crate::test_functions::{build_scheffe_class, load_class, TestFunctionClass};
use crate::witness_rank::{build_matrix, diagnose, MatrixKind};

use super::config::{ExperimentConfig, ExperimentKind, Source, TestFunctionSpec};

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "WITNESS_LAB_WORKERS";

/// Default singular-value tolerance of the `rank` experiment.
const DEFAULT_RANK_TOL: f64 = 1e-9;

// ── Invocation ──

/// Command-line overrides applied on top of a configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed_offset: u64,
    pub out: Option<PathBuf>,
}

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub experiment: &'static str,
    pub out_dir: PathBuf,
    pub files: Vec<String>,
}

/// Runs one experiment and writes its result files.
pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig, overrides: &Overrides) -> Result<RunSummary> {
    cfg.check(kind)?;
    let out_dir = overrides
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(kind.name()));
    std::fs::create_dir_all(&out_dir)?;
    let mut out = Outputs {
        dir: out_dir,
        files: Vec::new(),
    };
    let seeds: Vec<u64> = cfg.seeds.iter().map(|s| s.wrapping_add(overrides.seed_offset)).collect();
    let pool = worker_pool()?;
    pool.install(|| match kind {
        ExperimentKind::Plan => plan_experiment(cfg, &mut out),
        ExperimentKind::Misfit => misfit_experiment(cfg, &seeds, &mut out),
        ExperimentKind::Rank => rank_experiment(cfg, &mut out),
        ExperimentKind::RunMain | ExperimentKind::RunFactored => elimination_experiment(kind, cfg, &seeds, &mut out),
        ExperimentKind::RunDoubling => doubling_experiment(cfg, &seeds, &mut out),
        ExperimentKind::SeparationDemo => separation_experiment(cfg, &seeds, &mut out),
        ExperimentKind::ScheffeCheck => scheffe_experiment(cfg, &mut out),
    })?;
    Ok(RunSummary {
        experiment: kind.name(),
        out_dir: out.dir,
        files: out.files,
    })
}

/// A thread pool sized by [`WORKERS_ENV`] (rayon's default when unset or 0).
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let workers = match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be a non-negative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Seeds of a run: the configured list, or a single seed 0 for oracle runs.
fn effective_seeds(seeds: &[u64]) -> Vec<u64> {
    if seeds.is_empty() {
        vec![0]
    } else {
        seeds.to_vec()
    }
}

fn seed_stream(seed: u64, purpose: &str) -> StreamRng {
    SeedStreams::new(seed).stream(purpose, 0)
}

// ── Outputs ──

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
        Ok(())
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(path)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn writer(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        Ok(BufWriter::new(File::create(path)?))
    }
}

// ── Sources ──

/// A model class together with the index of the environment.
pub struct Loaded {
    pub class: ModelClass,
    pub truth: usize,
}

impl Loaded {
    pub fn truth(&self) -> &Candidate {
        self.class.get(self.truth)
    }
}

/// Builds or loads the class described by `source`.
pub fn load_source(source: &Source) -> Result<Loaded> {
    let (class, truth) = match source {
        Source::File { path, truth } => (load_class_file(path)?, *truth),
        Source::MabTree { horizon, actions, gap } => build_mab_tree_family(*horizon, *actions, *gap)?,
        Source::Separation { d, truth } => {
            let family = build_separation_family(*d)?;
            let t = truth.unwrap_or(family.len() - 1);
            (ModelClass::from_factored(family)?, t)
        }
        Source::Random { shape, models, seed } => {
            let mut rng = seed_stream(*seed, "instance");
            (ModelClass::new(random_tabular_class(shape, (*models).max(1), &mut rng))?, 0)
        }
        Source::RandomFactored { shape, models, seed } => {
            let mut rng = seed_stream(*seed, "instance");
            (ModelClass::from_factored(random_factored_class(shape, (*models).max(1), &mut rng))?, 0)
        }
        Source::SamplingBenchmark => sampling_benchmark()?,
    };
    if truth >= class.len() {
        return Err(Error::Config(format!("truth index {truth} outside a class of {}", class.len())));
    }
    Ok(Loaded { class, truth })
}

/// Loads a class document, or a single model document as a one-model class.
fn load_class_file(path: &Path) -> Result<ModelClass> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let single = value.get("levels").is_some() || value.get("parents").is_some();
    if !single {
        return crate::io::load_model_class(path);
    }
    match parse_model(value)? {
        ModelFile::Tabular(m) => ModelClass::new(vec![m]),
        ModelFile::Factored(f) => ModelClass::from_factored(vec![f]),
    }
}

/// Resolves the test-function class for a loaded source.
pub fn test_class(spec: &TestFunctionSpec, loaded: &Loaded) -> Result<TestFunctionClass> {
    Ok(match spec {
        TestFunctionSpec::Bellman => TestFunctionClass::bellman_class(&loaded.class),
        TestFunctionSpec::TvBall { bound } => TestFunctionClass::TvBall { bound: *bound },
        TestFunctionSpec::Scheffe => build_scheffe_class(&loaded.class)?,
        TestFunctionSpec::Factored => TestFunctionClass::FactoredSum {
            structure: loaded.truth().factored_or_err()?.structure().clone(),
        },
        TestFunctionSpec::File { path } => load_class(path)?,
    })
}

// ── plan ──

#[derive(Serialize)]
struct PlanOutput {
    truth: usize,
    v_star: f64,
    /// Greedy action per level and state.
    policy: Vec<Vec<usize>>,
    q: Vec<Vec<Vec<f64>>>,
}

fn plan_experiment(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let loaded = load_source(&cfg.source)?;
    let t = loaded.truth();
    let policy = (0..t.model.horizon())
        .map(|h| {
            (0..t.model.states(h))
                .map(|x| t.policy().action(h, x).expect("greedy policies are deterministic"))
                .collect()
        })
        .collect();
    out.json(
        "plan.json",
        &PlanOutput {
            truth: loaded.truth,
            v_star: t.value(),
            policy,
            q: t.plan.q.clone(),
        },
    )
}

// ── misfit ──

#[derive(Serialize)]
struct MisfitRow {
    seed: u64,
    level: usize,
    roll_in: usize,
    target: usize,
    n: usize,
    estimate: f64,
    exact: f64,
}

fn misfit_experiment(cfg: &ExperimentConfig, seeds: &[u64], out: &mut Outputs) -> Result<()> {
    let loaded = load_source(&cfg.source)?;
    let (h, n) = (cfg.level.unwrap_or(0), cfg.samples.unwrap_or(1));
    let f = test_class(&cfg.test_functions, &loaded)?;
    let roll_in = cfg.roll_in.unwrap_or(loaded.truth);
    if roll_in >= loaded.class.len() {
        return Err(Error::Config(format!("roll-in index {roll_in} outside the class")));
    }
    let truth = loaded.truth();
    let r = loaded.class.get(roll_in);
    let factored = matches!(f, TestFunctionClass::FactoredSum { .. });
    let exact: Vec<f64> = loaded
        .class
        .members()
        .iter()
        .map(|m| {
            if factored {
                factored_misfit_exact(r, m, truth, h)
            } else {
                witnessed_misfit_exact(r, m, truth, h, &f)
            }
        })
        .collect::<Result<_>>()?;
    let per_seed: Vec<Vec<MisfitRow>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = seed_stream(seed, "misfit");
            let data = collect_uniform(&truth.model, r.policy(), h, n, &mut rng)?;
            loaded
                .class
                .members()
                .iter()
                .enumerate()
                .map(|(target, m)| {
                    let est = match &f {
                        TestFunctionClass::FactoredSum { structure } => factored_misfit_estimate(&data, m, structure)?,
                        _ => witnessed_misfit_estimate(&data, m, &f)?,
                    };
                    Ok(MisfitRow {
                        seed,
                        level: h,
                        roll_in,
                        target,
                        n,
                        estimate: est.value,
                        exact: exact[target],
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<MisfitRow> = per_seed.into_iter().flatten().collect();
    out.csv("misfit.csv", &rows)
}

// ── rank ──

fn rank_experiment(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let loaded = load_source(&cfg.source)?;
    let f = test_class(&cfg.test_functions, &loaded)?;
    let tol = cfg.rank_tol.unwrap_or(DEFAULT_RANK_TOL);
    let truth = loaded.truth();
    let mut diags = diagnose(&loaded.class, truth, &f, cfg.algo.kappa, tol)?;
    if let Some(h) = cfg.level {
        truth.model.check_level(h)?;
        diags.retain(|d| d.level == h);
    }
    for d in &diags {
        let h = d.level;
        let eb = build_matrix(&loaded.class, truth, h, MatrixKind::Bellman)?;
        eb.write_csv(out.writer(&format!("bellman_h{h}.csv"))?)?;
        let w = build_matrix(&loaded.class, truth, h, MatrixKind::Misfit(&f))?;
        w.write_csv(out.writer(&format!("misfit_h{h}.csv"))?)?;
    }
    out.json("rank.json", &diags)
}

// ── run-main / run-factored ──

#[derive(Serialize)]
struct RunRow {
    seed: u64,
    output: Option<usize>,
    output_value: Option<f64>,
    v_star: f64,
    epsilon_optimal: bool,
    rounds: usize,
    trajectories: u64,
    fault: Option<String>,
}

/// Splits a run result into a record and a fault tag; hard errors propagate.
fn settle(result: Result<RunRecord>) -> Result<(Option<RunRecord>, Option<String>)> {
    match result {
        Ok(r) => Ok((Some(r), None)),
        Err(e @ Error::EmptyVersionSpace { .. }) | Err(e @ Error::Budget { .. }) => {
            let code = e.code().to_string();
            match e {
                Error::EmptyVersionSpace { record } | Error::Budget { record, .. } => Ok((Some(*record), Some(code))),
                _ => unreachable!(),
            }
        }
        Err(e @ Error::NoWitnessLevel { .. }) => Ok((None, Some(e.code().to_string()))),
        Err(e) => Err(e),
    }
}

fn algo_for(cfg: &ExperimentConfig) -> AlgoConfig {
    AlgoConfig {
        mode: cfg.mode(),
        ..cfg.algo.clone()
    }
}

fn elimination_experiment(kind: ExperimentKind, cfg: &ExperimentConfig, seeds: &[u64], out: &mut Outputs) -> Result<()> {
    let loaded = load_source(&cfg.source)?;
    let algo = algo_for(cfg);
    let f = match kind {
        ExperimentKind::RunFactored => None,
        _ => Some(test_class(&cfg.test_functions, &loaded)?),
    };
    let truth = loaded.truth();
    let v_star = truth.value();
    let seeds = effective_seeds(seeds);
    let results: Vec<(Option<RunRecord>, Option<String>)> = seeds
        .par_iter()
        .map(|&seed| {
            let rng = seed_stream(seed, "run");
            settle(match &f {
                Some(f) => run_main(&loaded.class, truth, f, &algo, &rng),
                None => run_factored(&loaded.class, truth, &algo, &rng),
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(seeds.len());
    for (&seed, (record, fault)) in seeds.iter().zip(&results) {
        if let Some(r) = record {
            out.json(&format!("seed_{seed}.json"), r)?;
            r.write_rounds_csv(out.writer(&format!("rounds_seed_{seed}.csv"))?)?;
        }
        let value = record.as_ref().and_then(|r| r.output_value);
        rows.push(RunRow {
            seed,
            output: record.as_ref().and_then(|r| r.output),
            output_value: value,
            v_star,
            epsilon_optimal: value.is_some_and(|v| v >= v_star - algo.epsilon),
            rounds: record.as_ref().map_or(0, |r| r.rounds.len()),
            trajectories: record.as_ref().map_or(0, |r| r.total_trajectories),
            fault: fault.clone(),
        });
    }
    out.csv("summary.csv", &rows)?;
    budget_check(&results, algo.budget)
}

/// Budget overruns are reported after the results are written.
fn budget_check(results: &[(Option<RunRecord>, Option<String>)], budget: Option<u64>) -> Result<()> {
    for (record, fault) in results {
        if fault.as_deref() == Some("budget") {
            let record = record.clone().expect("budget faults keep their record");
            return Err(Error::Budget {
                budget: budget.unwrap_or(record.total_trajectories),
                used: record.total_trajectories,
                record: Box::new(record),
            });
        }
    }
    Ok(())
}

// ── run-doubling ──

#[derive(Serialize)]
struct DoublingRow {
    seed: u64,
    output: Option<usize>,
    output_value: Option<f64>,
    v_star: f64,
    epsilon_optimal: bool,
    inner_runs: usize,
    trajectories: u64,
}

fn doubling_experiment(cfg: &ExperimentConfig, seeds: &[u64], out: &mut Outputs) -> Result<()> {
    let loaded = load_source(&cfg.source)?;
    let algo = algo_for(cfg);
    let f = test_class(&cfg.test_functions, &loaded)?;
    let truth = loaded.truth();
    let v_star = truth.value();
    let seeds = effective_seeds(seeds);
    let records: Vec<DoublingRecord> = seeds
        .par_iter()
        .map(|&seed| run_doubling(&loaded.class, truth, &f, &algo, &seed_stream(seed, "run")))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(seeds.len());
    for (&seed, r) in seeds.iter().zip(&records) {
        out.json(&format!("seed_{seed}.json"), r)?;
        rows.push(DoublingRow {
            seed,
            output: r.output,
            output_value: r.output_value,
            v_star,
            epsilon_optimal: r.output_value.is_some_and(|v| v >= v_star - algo.epsilon),
            inner_runs: r.inner.len(),
            trajectories: r.total_trajectories,
        });
    }
    out.csv("summary.csv", &rows)
}

// ── separation-demo ──

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationRow {
    pub learner: &'static str,
    pub seed: u64,
    pub trajectories: u64,
    pub v_pi: f64,
}

#[derive(Serialize)]
struct SeparationSummary {
    d: usize,
    seeds: usize,
    mean_trajectories_model_based: f64,
    mean_trajectories_profile: f64,
    profile_equivalent: bool,
}

/// Runs both learners on one planted path per seed.
pub fn separation_rows(d: usize, algo: &AlgoConfig, learner_budget: u64, seeds: &[u64]) -> Result<Vec<SeparationRow>> {
    let class = ModelClass::from_factored(build_separation_family(d)?)?;
    let models: Vec<TabularCdp> = class.members().iter().map(|c| c.model.clone()).collect();
    let g = GClass::optimal_q_and_policies(&models)?;
    let learner = LearnerConfig::separation(d, learner_budget);
    let per_seed: Vec<[SeparationRow; 2]> = seeds
        .par_iter()
        .map(|&seed| {
            let streams = SeedStreams::new(seed);
            let p = streams.stream("truth", 0).gen_range(0..class.len());
            let truth = class.get(p);
            let record = settle(run_factored(&class, truth, algo, &streams.stream("model-based", 0)))?.0;
            let model_based = SeparationRow {
                learner: "model_based",
                seed,
                trajectories: record.as_ref().map_or(0, |r| r.total_trajectories),
                v_pi: record.as_ref().and_then(|r| r.output_value).unwrap_or(0.0),
            };
            let o = profile_restricted_learner(&truth.model, &g, &learner, &mut streams.stream("profile", 0))?;
            let profile = SeparationRow {
                learner: "profile",
                seed,
                trajectories: o.trajectories,
                v_pi: o.value,
            };
            Ok([model_based, profile])
        })
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

fn separation_experiment(cfg: &ExperimentConfig, seeds: &[u64], out: &mut Outputs) -> Result<()> {
    let Source::Separation { d, .. } = cfg.source else {
        return Err(Error::Config("separation-demo needs a separation source".into()));
    };
    let algo = AlgoConfig {
        mode: Mode::Sampling,
        ..cfg.algo.clone()
    };
    let budget = cfg.learner_budget.unwrap_or(4 << d);
    let rows = separation_rows(d, &algo, budget, seeds)?;
    let mean = |name: &str| {
        let v: Vec<f64> = rows.iter().filter(|r| r.learner == name).map(|r| r.trajectories as f64).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    out.csv("separation.csv", &rows)?;
    out.json(
        "summary.json",
        &SeparationSummary {
            d,
            seeds: seeds.len(),
            mean_trajectories_model_based: mean("model_based"),
            mean_trajectories_profile: mean("profile"),
            profile_equivalent: profile_equivalence_check(d.min(4))?,
        },
    )
}

// ── scheffe-check ──

#[derive(Serialize)]
struct ScheffeRow {
    level: usize,
    roll_in: usize,
    target: usize,
    scheffe: f64,
    tv_ball: f64,
    abs_diff: f64,
}

#[derive(Serialize)]
struct ScheffeSummary {
    pairs: usize,
    max_abs_diff: f64,
}

fn scheffe_experiment(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let loaded = load_source(&cfg.source)?;
    let scheffe = build_scheffe_class(&loaded.class)?;
    let tv = TestFunctionClass::tv_ball();
    let truth = loaded.truth();
    let mut rows = Vec::new();
    for h in 0..loaded.class.horizon() {
        let a = build_matrix(&loaded.class, truth, h, MatrixKind::Misfit(&scheffe))?;
        let b = build_matrix(&loaded.class, truth, h, MatrixKind::Misfit(&tv))?;
        for i in 0..a.size() {
            for j in 0..a.size() {
                rows.push(ScheffeRow {
                    level: h,
                    roll_in: i,
                    target: j,
                    scheffe: a.get(i, j),
                    tv_ball: b.get(i, j),
                    abs_diff: (a.get(i, j) - b.get(i, j)).abs(),
                });
            }
        }
    }
    let max_abs_diff = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    out.csv("scheffe.csv", &rows)?;
    out.json(
        "summary.json",
        &ScheffeSummary {
            pairs: rows.len(),
            max_abs_diff,
        },
    )
}

// ── Errors ──

/// Machine-readable error document printed by the command-line tool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<crate::error::Violation>,
}

impl ErrorReport {
    pub fn of(e: &Error) -> Self {
        Self {
            error: e.code(),
            message: e.to_string(),
            violations: match e {
                Error::InvalidModel(v) => v.clone(),
                _ => Vec::new(),
            },
        }
    }
}

/// Exit status for an error: 2 for bad input, 1 for failures during a run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidModel(_)
        | Error::Structure(_)
        | Error::LevelOutOfRange { .. }
        | Error::Capacity { .. }
        | Error::ClassTooLarge { .. }
        | Error::Config(_)
        | Error::Json(_)
        | Error::Io(_) => 2,
        _ => 1,
    }
}
