//! Optimistic model elimination.
//!
//! Each round picks the surviving model with the highest predicted value,
//! checks its prediction against the environment, and otherwise finds a level
//! where the model's own Bellman error is large, collects data there with
//! uniformly random actions, and discards every survivor whose estimated
//! witnessed misfit exceeds `φ`. In oracle mode every estimate is replaced by
//! the exact quantity.
//!
//! Also here: the doubling wrapper that guesses `κ` and the witness rank, and
//! the factored variant that swaps in the factored misfit estimator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdp::{policy_value, Candidate, ModelClass};
use crate::error::{Error, Result};
use crate::factored::FactoredMdp;
use crate::misfit::{
    bellman_error_estimate, bellman_from_occupancy, collect_on_policy, collect_uniform, factored_from_occupancy,
    factored_misfit_estimate, misfit_from_occupancy, roll_in_occupancy, witnessed_misfit_estimate, ActionMode,
    MisfitData,
};
use crate::rng::StreamRng;
use crate::test_functions::TestFunctionClass;

// ── Configuration ──

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Oracle,
    Sampling,
}

/// Parameters of one run. Unset quantities are derived from the sample-size
/// formulas with all hidden constants equal to one (scaled by the
/// multipliers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgoConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub mode: Mode,
    pub phi: Option<f64>,
    pub n: Option<usize>,
    pub n_e: Option<usize>,
    pub n_multiplier: f64,
    pub n_e_multiplier: f64,
    pub max_rounds: Option<usize>,
    pub kappa: f64,
    /// Witness rank; the class size is used when absent.
    pub wrank: Option<f64>,
    /// Upper bound on the norm product of the rank factorisation.
    pub beta: f64,
    /// Hard cap on trajectories over the whole run.
    pub budget: Option<u64>,
    /// Epoch cap for the doubling wrapper.
    pub max_epochs: usize,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            delta: 0.1,
            mode: Mode::Oracle,
            phi: None,
            n: None,
            n_e: None,
            n_multiplier: 1.0,
            n_e_multiplier: 1.0,
            max_rounds: None,
            kappa: 1.0,
            wrank: None,
            beta: 4.0,
            budget: None,
            max_epochs: 12,
        }
    }
}

impl AlgoConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad("epsilon must lie in (0, 1]");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad("delta must lie in (0, 1]");
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return bad("kappa must lie in (0, 1]");
        }
        if self.phi.is_some_and(|p| p < 0.0) {
            return bad("phi must be non-negative");
        }
        if self.n == Some(0) || self.n_e == Some(0) {
            return bad("sample sizes must be at least 1");
        }
        if self.wrank.is_some_and(|w| w < 1.0) {
            return bad("wrank must be at least 1");
        }
        Ok(())
    }
}

/// Concrete parameters of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub phi: f64,
    pub max_rounds: usize,
    pub n_e: usize,
    pub n: usize,
    pub kappa: f64,
    pub wrank: f64,
    pub delta: f64,
}

/// Sizes of the problem that enter the parameter formulas.
#[derive(Debug, Clone, Copy)]
pub struct ProblemSize {
    pub horizon: usize,
    pub actions: usize,
    pub models: usize,
    pub log_f: f64,
}

impl ProblemSize {
    pub fn of(class: &ModelClass, f: &TestFunctionClass) -> Self {
        Self {
            horizon: class.horizon(),
            actions: class.actions(),
            models: class.len(),
            log_f: f.log_size(class.len(), class.horizon(), class.actions()),
        }
    }
}

/// `φ = κε/(48H√w)` and the round cap `T = H w ln(β/2φ)/ln(5/3)`.
pub fn phi_and_rounds(epsilon: f64, kappa: f64, wrank: f64, beta: f64, horizon: usize) -> (f64, usize) {
    let h = horizon as f64;
    let phi = kappa * epsilon / (48.0 * h * wrank.sqrt());
    let t = h * wrank * (beta / (2.0 * phi)).ln().max(1.0) / (5.0f64 / 3.0).ln();
    (phi, t.ceil().max(1.0) as usize)
}

/// Parameters of a plain run: `n_e = H² ln(HT/δ)/ε²` and
/// `n = H² K w ln(T|M||F|/δ)/(κε)²`, each times its multiplier.
pub fn derive(cfg: &AlgoConfig, size: ProblemSize) -> Derived {
    let wrank = cfg.wrank.unwrap_or(size.models as f64);
    derive_with(cfg, size, cfg.kappa, wrank, cfg.delta, 1.0, 1.0)
}

// The doubling wrapper uses the same formulas with extra constants inside
// the logarithms (6 for n_e, 12 for n).
fn derive_with(cfg: &AlgoConfig, size: ProblemSize, kappa: f64, wrank: f64, delta: f64, c_e: f64, c_n: f64) -> Derived {
    let (eps, h) = (cfg.epsilon, size.horizon as f64);
    let (phi_auto, t_auto) = phi_and_rounds(eps, kappa, wrank, cfg.beta, size.horizon);
    let phi = cfg.phi.unwrap_or(phi_auto);
    let t = cfg.max_rounds.unwrap_or(t_auto);
    let n_e = cfg.n_e.unwrap_or_else(|| {
        let v = cfg.n_e_multiplier * h * h * (c_e * h * t as f64 / delta).ln() / (eps * eps);
        v.ceil().max(1.0) as usize
    });
    let n = cfg.n.unwrap_or_else(|| {
        let log_term = (c_n * t as f64).ln() + (size.models as f64).ln() + size.log_f - delta.ln();
        let v = cfg.n_multiplier * h * h * size.actions as f64 * wrank * log_term / (kappa * eps).powi(2);
        v.ceil().max(1.0) as usize
    });
    Derived {
        phi,
        max_rounds: t,
        n_e,
        n,
        kappa,
        wrank,
        delta,
    }
}

// ── Records ──

/// Surviving model ids (in class order) after a round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionSpace {
    pub survivors: Vec<usize>,
    pub round: usize,
}

impl VersionSpace {
    pub fn full(size: usize) -> Self {
        Self {
            survivors: (0..size).collect(),
            round: 0,
        }
    }
}

/// Keeps the survivors whose estimate is at most `phi`; `estimates[k]`
/// belongs to `vs.survivors[k]`.
pub fn eliminate(vs: &VersionSpace, estimates: &[f64], phi: f64) -> VersionSpace {
    assert_eq!(vs.survivors.len(), estimates.len(), "one estimate per survivor");
    VersionSpace {
        survivors: vs
            .survivors
            .iter()
            .zip(estimates)
            .filter(|(_, &w)| w <= phi)
            .map(|(&m, _)| m)
            .collect(),
        round: vs.round + 1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub chosen: usize,
    pub predicted_value: f64,
    pub estimated_value: f64,
    pub terminated: bool,
    /// (Estimated) Bellman error of the chosen model at every level.
    pub bellman_errors: Vec<f64>,
    pub level: Option<usize>,
    /// `(model id, misfit estimate)` for every survivor entering the round.
    pub misfits: Vec<(usize, f64)>,
    pub eliminated: Vec<usize>,
    pub survivors: Vec<usize>,
    pub trajectories: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub mode: Mode,
    pub epsilon: f64,
    pub test_class: String,
    pub params: Derived,
    pub rounds: Vec<RoundRecord>,
    /// Id of the model whose policy was returned.
    pub output: Option<usize>,
    /// Value of the returned policy in the true model.
    pub output_value: Option<f64>,
    pub total_trajectories: u64,
}

impl RunRecord {
    /// Writes one CSV row per round.
    pub fn write_rounds_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "round",
            "chosen",
            "predicted_value",
            "estimated_value",
            "terminated",
            "level",
            "eliminated",
            "survivors",
            "trajectories",
        ])?;
        let ids = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
        for r in &self.rounds {
            out.write_record([
                r.round.to_string(),
                r.chosen.to_string(),
                r.predicted_value.to_string(),
                r.estimated_value.to_string(),
                r.terminated.to_string(),
                r.level.map(|h| h.to_string()).unwrap_or_default(),
                ids(&r.eliminated),
                ids(&r.survivors),
                r.trajectories.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

// ── Main loop ──

/// How misfits are measured in the elimination step.
#[derive(Debug, Clone, Copy)]
enum Witness<'a> {
    Class(&'a TestFunctionClass),
    Factored,
}

struct Run<'a> {
    class: &'a ModelClass,
    truth: &'a Candidate,
    witness: Witness<'a>,
    mode: Mode,
    epsilon: f64,
    params: Derived,
    budget: Option<u64>,
    used_before: u64,
}

impl Run<'_> {
    fn record(&self, rounds: Vec<RoundRecord>, used: u64) -> RunRecord {
        RunRecord {
            mode: self.mode,
            epsilon: self.epsilon,
            test_class: match self.witness {
                Witness::Class(f) => f.name().into(),
                Witness::Factored => "factored_sum".into(),
            },
            params: self.params,
            rounds,
            output: None,
            output_value: None,
            total_trajectories: used,
        }
    }

    fn spend(&self, used: &mut u64, amount: usize, rounds: &[RoundRecord]) -> Result<()> {
        let next = *used + amount as u64;
        if let Some(budget) = self.budget {
            if self.used_before + next > budget {
                return Err(Error::Budget {
                    budget,
                    used: self.used_before + *used,
                    record: Box::new(self.record(rounds.to_vec(), *used)),
                });
            }
        }
        *used = next;
        Ok(())
    }

    fn execute(&self, rng: &StreamRng) -> Result<RunRecord> {
        let (h_max, eps) = (self.class.horizon(), self.epsilon);
        let threshold = eps / (4.0 * h_max as f64);
        let mut vs = VersionSpace::full(self.class.len());
        let mut rounds: Vec<RoundRecord> = Vec::new();
        let mut used = 0u64;

        for t in 1..=self.params.max_rounds {
            let chosen = optimistic(self.class, &vs.survivors);
            let m = self.class.get(chosen);
            let mut round_used = 0u64;

            let (v_hat, errors) = match self.mode {
                Mode::Oracle => {
                    let v = policy_value(&self.truth.model, m.policy())?;
                    let errors = (0..h_max)
                        .map(|h| {
                            let occ = roll_in_occupancy(m, self.truth, h)?;
                            bellman_from_occupancy(&occ, m, self.truth, h)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    (v, errors)
                }
                Mode::Sampling => {
                    self.spend(&mut used, self.params.n_e, &rounds)?;
                    round_used += self.params.n_e as u64;
                    let trajs = collect_on_policy(&self.truth.model, m.policy(), self.params.n_e, &mut rng.child("value", t as u64))?;
                    let v = trajs.iter().map(|tr| tr.total_reward()).sum::<f64>() / trajs.len() as f64;
                    let errors = (0..h_max)
                        .map(|h| {
                            let data = MisfitData::from_trajectories(&trajs, h, ActionMode::Policy, Some(chosen));
                            Ok(bellman_error_estimate(&data, m)?.value)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    (v, errors)
                }
            };

            let mut round = RoundRecord {
                round: t,
                chosen,
                predicted_value: m.value(),
                estimated_value: v_hat,
                terminated: false,
                bellman_errors: errors,
                level: None,
                misfits: Vec::new(),
                eliminated: Vec::new(),
                survivors: vs.survivors.clone(),
                trajectories: round_used,
            };

            if (v_hat - m.value()).abs() <= eps / 2.0 {
                round.terminated = true;
                rounds.push(round);
                let mut rec = self.record(rounds, used);
                rec.output = Some(chosen);
                rec.output_value = Some(policy_value(&self.truth.model, m.policy())?);
                return Ok(rec);
            }

            let Some(h_t) = round.bellman_errors.iter().position(|&e| e >= threshold) else {
                return Err(Error::NoWitnessLevel { round: t, threshold });
            };
            round.level = Some(h_t);

            let estimates: Vec<f64> = match self.mode {
                Mode::Oracle => {
                    let occ = roll_in_occupancy(m, self.truth, h_t)?;
                    vs.survivors
                        .par_iter()
                        .map(|&j| {
                            let target = self.class.get(j);
                            match self.witness {
                                Witness::Class(f) => misfit_from_occupancy(&occ, target, self.truth, h_t, f, ActionMode::Policy),
                                Witness::Factored => factored_from_occupancy(&occ, target, self.truth, h_t),
                            }
                        })
                        .collect::<Result<_>>()?
                }
                Mode::Sampling => {
                    self.spend(&mut used, self.params.n, &rounds)?;
                    round.trajectories += self.params.n as u64;
                    let data = collect_uniform(&self.truth.model, m.policy(), h_t, self.params.n, &mut rng.child("misfit", t as u64))?;
                    let structure = match self.witness {
                        Witness::Factored => Some(self.truth.factored_or_err()?.structure().clone()),
                        Witness::Class(_) => None,
                    };
                    vs.survivors
                        .par_iter()
                        .map(|&j| {
                            let target = self.class.get(j);
                            match (self.witness, &structure) {
                                (Witness::Class(f), _) => Ok(witnessed_misfit_estimate(&data, target, f)?.value),
                                (Witness::Factored, Some(s)) => Ok(factored_misfit_estimate(&data, target, s)?.value),
                                (Witness::Factored, None) => unreachable!(),
                            }
                        })
                        .collect::<Result<_>>()?
                }
            };

            let next = eliminate(&vs, &estimates, self.params.phi);
            round.misfits = vs.survivors.iter().copied().zip(estimates).collect();
            round.eliminated = vs.survivors.iter().copied().filter(|j| !next.survivors.contains(j)).collect();
            round.survivors = next.survivors.clone();
            rounds.push(round);
            if next.survivors.is_empty() {
                return Err(Error::EmptyVersionSpace {
                    record: Box::new(self.record(rounds, used)),
                });
            }
            vs = next;
        }
        Ok(self.record(rounds, used))
    }
}

fn optimistic(class: &ModelClass, survivors: &[usize]) -> usize {
    let mut best = survivors[0];
    for &j in &survivors[1..] {
        if class.get(j).value() > class.get(best).value() {
            best = j;
        }
    }
    best
}

/// Runs the elimination learner with a test-function class.
pub fn run_main(class: &ModelClass, truth: &Candidate, f: &TestFunctionClass, cfg: &AlgoConfig, rng: &StreamRng) -> Result<RunRecord> {
    cfg.check()?;
    class.check_compatible(truth)?;
    let params = derive(cfg, ProblemSize::of(class, f));
    Run {
        class,
        truth,
        witness: Witness::Class(f),
        mode: cfg.mode,
        epsilon: cfg.epsilon,
        params,
        budget: cfg.budget,
        used_before: 0,
    }
    .execute(rng)
}

// ── Doubling ──

/// One inner run of the doubling wrapper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerRun {
    pub epoch: usize,
    pub iteration: usize,
    pub params: Derived,
    pub record: Option<RunRecord>,
    /// Set when the inner run faulted (e.g. its version space emptied).
    pub fault: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingRecord {
    pub inner: Vec<InnerRun>,
    /// Inner iterations executed in each epoch.
    pub iterations_per_epoch: Vec<usize>,
    pub output: Option<usize>,
    pub output_value: Option<f64>,
    pub total_trajectories: u64,
}

/// Guesses `w/κ` by doubling: epoch `i` sets `N_i = 2^{i−1}`, inner iteration
/// `j` sets `κ = 2^{−(j−1)}`, `w = N_i κ` (stopping once `w < 1`), and runs
/// the main loop for at most `T_{i,j}` rounds. The first returned policy wins.
/// `cfg.kappa`, `cfg.wrank`, `cfg.phi`, `cfg.n`, `cfg.n_e` and
/// `cfg.max_rounds` are ignored.
pub fn run_doubling(class: &ModelClass, truth: &Candidate, f: &TestFunctionClass, cfg: &AlgoConfig, rng: &StreamRng) -> Result<DoublingRecord> {
    cfg.check()?;
    class.check_compatible(truth)?;
    let size = ProblemSize::of(class, f);
    let base = AlgoConfig {
        phi: None,
        n: None,
        n_e: None,
        max_rounds: None,
        ..cfg.clone()
    };
    let mut out = DoublingRecord {
        inner: Vec::new(),
        iterations_per_epoch: Vec::new(),
        output: None,
        output_value: None,
        total_trajectories: 0,
    };
    for i in 1..=cfg.max_epochs {
        let n_i = 2f64.powi(i as i32 - 1);
        let delta_i = cfg.delta / (i * (i + 1)) as f64;
        let mut iterations = 0;
        for j in 1.. {
            let kappa = 0.5f64.powi(j as i32 - 1);
            let wrank = n_i * kappa;
            if wrank < 1.0 {
                break;
            }
            iterations += 1;
            let delta_ij = delta_i / (j * (j + 1)) as f64;
            let params = derive_with(&base, size, kappa, wrank, delta_ij, 6.0, 12.0);
            let run = Run {
                class,
                truth,
                witness: Witness::Class(f),
                mode: cfg.mode,
                epsilon: cfg.epsilon,
                params,
                budget: cfg.budget,
                used_before: out.total_trajectories,
            };
            let child = rng.child("doubling", ((i as u64) << 32) | j as u64);
            let (record, fault) = match run.execute(&child) {
                Ok(r) => (Some(r), None),
                Err(Error::Budget { budget, used, record }) => {
                    out.total_trajectories = used;
                    out.inner.push(InnerRun {
                        epoch: i,
                        iteration: j,
                        params,
                        record: Some(*record.clone()),
                        fault: Some("budget".into()),
                    });
                    out.iterations_per_epoch.push(iterations);
                    return Err(Error::Budget { budget, used, record });
                }
                Err(Error::EmptyVersionSpace { record }) => (Some(*record), Some("empty_version_space".into())),
                Err(e @ Error::NoWitnessLevel { .. }) => (None, Some(e.to_string())),
                Err(e) => return Err(e),
            };
            if let Some(r) = &record {
                out.total_trajectories += r.total_trajectories;
            }
            let done = record.as_ref().and_then(|r| r.output.map(|o| (o, r.output_value)));
            out.inner.push(InnerRun {
                epoch: i,
                iteration: j,
                params,
                record,
                fault,
            });
            if let Some((o, v)) = done {
                out.iterations_per_epoch.push(iterations);
                out.output = Some(o);
                out.output_value = v;
                return Ok(out);
            }
        }
        out.iterations_per_epoch.push(iterations);
    }
    Ok(out)
}

// ── Factored variant ──

/// The factored variant: uniform-action data, the unweighted factored
/// estimator, `κ = 1/K` and `w = Σ_i K |O|^{|pa_i|}` unless overridden.
/// Unset `n` follows `d² (L ln(dKL/ε) + ln(3T/δ)) L H K² / (|O| ε²)`.
pub fn run_factored(class: &ModelClass, truth: &Candidate, cfg: &AlgoConfig, rng: &StreamRng) -> Result<RunRecord> {
    cfg.check()?;
    class.check_compatible(truth)?;
    let ft = truth.factored_or_err()?;
    for m in class.members() {
        if m.factored_or_err()?.structure() != ft.structure() {
            return Err(Error::Structure("factored models have different parent sets or alphabets".into()));
        }
    }
    let s = ft.structure();
    let k = ft.actions();
    let kappa = 1.0 / k as f64;
    let wrank = cfg.wrank.unwrap_or(s.factor_dim(k) as f64);
    let size = ProblemSize {
        horizon: class.horizon(),
        actions: k,
        models: class.len(),
        log_f: 0.0,
    };
    let mut params = derive_with(cfg, size, kappa, wrank, cfg.delta, 1.0, 1.0);
    if cfg.n.is_none() {
        let (d, l) = (s.d() as f64, ft.parameter_count() as f64);
        let (h, kf, o, eps) = (class.horizon() as f64, k as f64, s.num_values as f64, cfg.epsilon);
        let inner = l * (d * kf * l / eps).ln() + (3.0 * params.max_rounds as f64 / cfg.delta).ln();
        let v = cfg.n_multiplier * d * d * inner * l * h * kf * kf / (o * eps * eps);
        params.n = v.ceil().clamp(1.0, usize::MAX as f64) as usize;
    }
    Run {
        class,
        truth,
        witness: Witness::Factored,
        mode: cfg.mode,
        epsilon: cfg.epsilon,
        params,
        budget: cfg.budget,
        used_before: 0,
    }
    .execute(rng)
}

/// Enumerates every model that replaces each CPT row of `base` by a point of
/// the simplex grid with resolution `1/resolution`: a finite stand-in for the
/// class of all CPTs under a fixed structure. Fails if the grid would hold
/// more than `cap` models.
pub fn cpt_grid_class(base: &FactoredMdp, resolution: usize, cap: usize) -> Result<Vec<FactoredMdp>> {
    let o = base.structure().num_values;
    let points = simplex_grid(o, resolution.max(1));
    let rows: Vec<(usize, usize, usize)> = base
        .cpts()
        .iter()
        .enumerate()
        .flat_map(|(h, level)| level.iter().enumerate().flat_map(move |(i, t)| (0..t.len()).map(move |r| (h, i, r))))
        .collect();
    let total = (points.len() as f64).powi(rows.len() as i32);
    if total > cap as f64 {
        return Err(Error::ClassTooLarge {
            size: total.min(usize::MAX as f64) as usize,
            cap,
        });
    }
    let total = total as usize;
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let mut c = code;
        let mut cpts = base.cpts().to_vec();
        for &(h, i, r) in &rows {
            cpts[h][i][r] = points[c % points.len()].clone();
            c /= points.len();
        }
        out.push(base.with_cpts(cpts)?);
    }
    Ok(out)
}

fn simplex_grid(dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, res: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == dim - 1 {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / res as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(dim, left - c, res, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, resolution, resolution, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::random::{random_tabular_class, RandomTabular};
    use crate::cdp::plan;
    use crate::rng::SeedStreams;

    #[test]
    fn eliminate_threshold_is_inclusive() {
        let vs = VersionSpace::full(4);
        let next = eliminate(&vs, &[0.1, 0.2, 0.3, 0.2], 0.2);
        assert_eq!(next.survivors, vec![0, 1, 3]);
        assert_eq!(next.round, 1);
        assert_eq!(eliminate(&vs, &[0.0; 4], 0.2).survivors, vs.survivors);
    }

    #[test]
    fn singleton_class_terminates_at_once() {
        let m = random_tabular_class(&RandomTabular::default(), 1, &mut SeedStreams::new(0).stream("c", 0));
        let class = ModelClass::new(m).unwrap();
        let f = TestFunctionClass::bellman_class(&class);
        let rec = run_main(&class, class.get(0), &f, &AlgoConfig::default(), &SeedStreams::new(0).stream("r", 0)).unwrap();
        assert_eq!(rec.rounds.len(), 1);
        assert_eq!(rec.output, Some(0));
        assert_eq!(rec.total_trajectories, 0);
    }

    #[test]
    fn oracle_runs_are_safe_and_optimal() {
        for seed in 0..10 {
            let models = random_tabular_class(&RandomTabular::default(), 6, &mut SeedStreams::new(seed).stream("c", 0));
            let class = ModelClass::new(models).unwrap();
            let truth_ix = (seed % 6) as usize;
            let truth = class.get(truth_ix);
            let f = TestFunctionClass::bellman_class(&class);
            let cfg = AlgoConfig {
                epsilon: 0.05,
                ..AlgoConfig::default()
            };
            let rec = run_main(&class, truth, &f, &cfg, &SeedStreams::new(seed).stream("r", 0)).unwrap();
            let v_star = plan(&truth.model).value;
            assert!(rec.output_value.unwrap() >= v_star - cfg.epsilon);
            for r in &rec.rounds {
                assert!(!r.eliminated.contains(&truth_ix));
                if !r.terminated {
                    assert!(r.eliminated.contains(&r.chosen));
                }
            }
        }
    }

    #[test]
    fn derived_parameters_follow_formulas() {
        let cfg = AlgoConfig {
            epsilon: 0.1,
            delta: 0.1,
            kappa: 1.0,
            wrank: Some(4.0),
            beta: 4.0,
            ..AlgoConfig::default()
        };
        let size = ProblemSize {
            horizon: 2,
            actions: 2,
            models: 4,
            log_f: 8f64.ln(),
        };
        let d = derive(&cfg, size);
        let phi = 0.1 / (48.0 * 2.0 * 2.0);
        assert!((d.phi - phi).abs() < 1e-15);
        let t = (2.0 * 4.0 * (4.0 / (2.0 * phi)).ln() / (5.0f64 / 3.0).ln()).ceil() as usize;
        assert_eq!(d.max_rounds, t);
        let n_e = (4.0 * (2.0 * t as f64 / 0.1).ln() / 0.01).ceil() as usize;
        assert_eq!(d.n_e, n_e);
        let n = (4.0 * 2.0 * 4.0 * (t as f64 * 4.0 * 8.0 / 0.1).ln() / 0.01).ceil() as usize;
        assert_eq!(d.n, n);
    }

    #[test]
    fn simplex_grid_points() {
        let g = simplex_grid(3, 2);
        assert_eq!(g.len(), 6);
        assert!(g.iter().all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-15));
    }
}
