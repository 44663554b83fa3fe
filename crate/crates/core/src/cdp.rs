//! Layered finite decision processes: representation, exact planning,
//! policy evaluation, occupancy measures and trajectory sampling.
//!
//! A model with horizon `H` has levels `0..=H`; decisions happen at levels
//! `0..H` and level `H` is terminal (value zero). Transitions from level `h`
//! always land in level `h + 1`. Ties between actions are broken toward the
//! lowest action index everywhere.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation, ViolationKind};
use crate::factored::FactoredMdp;
use crate::rng::{StreamId, StreamRng};
use crate::PROB_TOL;

// ── Distributions ──

/// A sparse distribution over state indices, sorted by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseDist {
    entries: Vec<(usize, f64)>,
}

impl SparseDist {
    /// Builds a distribution, merging duplicate indices and dropping exact zeros.
    /// Normalisation is not checked here; see [`validate`].
    pub fn new(mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, p) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += p,
                _ => merged.push((i, p)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        Self { entries: merged }
    }

    pub fn point(index: usize) -> Self {
        Self { entries: vec![(index, 1.0)] }
    }

    pub fn uniform(n: usize) -> Self {
        Self::new((0..n).map(|i| (i, 1.0 / n as f64)).collect())
    }

    pub fn from_dense(probs: &[f64]) -> Self {
        Self::new(probs.iter().copied().enumerate().collect())
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn prob(&self, index: usize) -> f64 {
        match self.entries.binary_search_by_key(&index, |e| e.0) {
            Ok(k) => self.entries[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for &(i, p) in &self.entries {
            if i < n {
                out[i] += p;
            }
        }
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(self.entries.iter().map(|e| (e.0, e.1)), rng)
    }
}

/// A discrete reward distribution: `(value, probability)` pairs sorted by value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardDist {
    outcomes: Vec<(f64, f64)>,
}

impl RewardDist {
    pub fn deterministic(value: f64) -> Self {
        Self { outcomes: vec![(value, 1.0)] }
    }

    pub fn new(values: &[f64], probs: &[f64]) -> Result<Self> {
        if values.len() != probs.len() {
            return Err(Error::Structure(format!(
                "reward has {} values but {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        if values.is_empty() {
            return Err(Error::Empty("reward distribution"));
        }
        let mut outcomes: Vec<(f64, f64)> = values.iter().copied().zip(probs.iter().copied()).collect();
        // -0.0 and 0.0 are the same reward.
        for o in &mut outcomes {
            if o.0 == 0.0 {
                o.0 = 0.0;
            }
        }
        outcomes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(outcomes.len());
        for (v, p) in outcomes {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        Ok(Self { outcomes: merged })
    }

    pub fn outcomes(&self) -> &[(f64, f64)] {
        &self.outcomes
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().map(|(v, p)| v * p).sum()
    }

    /// Largest value carrying positive probability.
    pub fn max_value(&self) -> f64 {
        self.outcomes
            .iter()
            .filter(|o| o.1 > 0.0)
            .map(|o| o.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = sample_index(self.outcomes.iter().enumerate().map(|(k, o)| (k, o.1)), rng);
        self.outcomes[k].0
    }
}

fn sample_index<R: Rng + ?Sized>(entries: impl Iterator<Item = (usize, f64)>, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let mut last_positive = None;
    for (i, p) in entries {
        if p > 0.0 {
            cum += p;
            last_positive = Some(i);
            if u < cum {
                return i;
            }
        }
    }
    // Rounding can leave the cumulative sum a hair below one.
    last_positive.expect("sampling from a distribution with no positive mass")
}

// ── Models ──

/// A layered finite MDP with discrete reward distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::TabularDoc", into = "crate::io::TabularDoc")]
pub struct TabularCdp {
    horizon: usize,
    actions: usize,
    level_sizes: Vec<usize>,
    initial: SparseDist,
    transitions: Vec<Vec<Vec<SparseDist>>>,
    rewards: Vec<Vec<Vec<RewardDist>>>,
}

impl TabularCdp {
    /// Builds and validates a model. `level_sizes` has `H + 1` entries;
    /// `transitions[h][x][a]` and `rewards[h][x][a]` cover levels `0..H`.
    pub fn new(
        actions: usize,
        level_sizes: Vec<usize>,
        initial: SparseDist,
        transitions: Vec<Vec<Vec<SparseDist>>>,
        rewards: Vec<Vec<Vec<RewardDist>>>,
    ) -> Result<Self> {
        let model = Self::from_parts_unchecked(actions, level_sizes, initial, transitions, rewards)?;
        validate(&model)?;
        Ok(model)
    }

    /// Checks shapes only. Probabilities, reward ranges and index ranges are
    /// left to [`validate`], which reports every violation with its location.
    pub fn from_parts_unchecked(
        actions: usize,
        level_sizes: Vec<usize>,
        initial: SparseDist,
        transitions: Vec<Vec<Vec<SparseDist>>>,
        rewards: Vec<Vec<Vec<RewardDist>>>,
    ) -> Result<Self> {
        if level_sizes.len() < 2 {
            return Err(Error::Structure("a model needs at least one decision level".into()));
        }
        if actions == 0 {
            return Err(Error::Structure("a model needs at least one action".into()));
        }
        let horizon = level_sizes.len() - 1;
        if level_sizes.contains(&0) {
            return Err(Error::Structure("every level needs at least one state".into()));
        }
        if transitions.len() != horizon || rewards.len() != horizon {
            return Err(Error::Structure(format!(
                "expected {horizon} decision levels, got {} transition and {} reward levels",
                transitions.len(),
                rewards.len()
            )));
        }
        for h in 0..horizon {
            let n = level_sizes[h];
            if transitions[h].len() != n || rewards[h].len() != n {
                return Err(Error::Structure(format!("level {h}: expected {n} states")));
            }
            for x in 0..n {
                if transitions[h][x].len() != actions || rewards[h][x].len() != actions {
                    return Err(Error::Structure(format!(
                        "level {h} state {x}: expected {actions} actions"
                    )));
                }
            }
        }
        Ok(Self {
            horizon,
            actions,
            level_sizes,
            initial,
            transitions,
            rewards,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn level_sizes(&self) -> &[usize] {
        &self.level_sizes
    }

    pub fn states(&self, h: usize) -> usize {
        self.level_sizes[h]
    }

    pub fn initial(&self) -> &SparseDist {
        &self.initial
    }

    pub fn transition(&self, h: usize, x: usize, a: usize) -> &SparseDist {
        &self.transitions[h][x][a]
    }

    pub fn reward(&self, h: usize, x: usize, a: usize) -> &RewardDist {
        &self.rewards[h][x][a]
    }

    /// A copy with every transition row replaced by `f(h, x, a, row)`;
    /// the result is validated.
    pub fn map_transitions<F>(&self, mut f: F) -> Result<TabularCdp>
    where
        F: FnMut(usize, usize, usize, &SparseDist) -> SparseDist,
    {
        let mut out = self.clone();
        for (h, level) in out.transitions.iter_mut().enumerate() {
            for (x, row) in level.iter_mut().enumerate() {
                for (a, dist) in row.iter_mut().enumerate() {
                    *dist = f(h, x, a, dist);
                }
            }
        }
        validate(&out)?;
        Ok(out)
    }

    /// A copy with every reward replaced by `f(h, x, a, reward)`.
    pub fn map_rewards<F>(&self, mut f: F) -> Result<TabularCdp>
    where
        F: FnMut(usize, usize, usize, &RewardDist) -> RewardDist,
    {
        let mut out = self.clone();
        for (h, level) in out.rewards.iter_mut().enumerate() {
            for (x, row) in level.iter_mut().enumerate() {
                for (a, r) in row.iter_mut().enumerate() {
                    *r = f(h, x, a, r);
                }
            }
        }
        validate(&out)?;
        Ok(out)
    }

    /// True if both models share horizon, action count and level sizes.
    pub fn same_shape(&self, other: &TabularCdp) -> bool {
        self.actions == other.actions && self.level_sizes == other.level_sizes
    }

    pub(crate) fn check_level(&self, h: usize) -> Result<()> {
        if h >= self.horizon {
            return Err(Error::LevelOutOfRange {
                level: h,
                horizon: self.horizon,
            });
        }
        Ok(())
    }
}

// ── Validation ──

fn violation(kind: ViolationKind, level: Option<usize>, state: Option<usize>, action: Option<usize>, detail: String) -> Violation {
    Violation {
        kind,
        level,
        state,
        action,
        detail,
    }
}

/// Checks every numeric invariant of a model and reports all violations.
///
/// Checked: normalised non-negative transition rows and initial distribution,
/// next-state indices in range, reward values in `[0, 1]` with normalised
/// probabilities, and cumulative reward at most one along every path that is
/// reachable from the initial distribution.
pub fn validate(model: &TabularCdp) -> Result<()> {
    let mut out = Vec::new();
    check_dist(&model.initial, model.level_sizes[0], None, None, None, &mut out);
    for h in 0..model.horizon {
        for x in 0..model.level_sizes[h] {
            for a in 0..model.actions {
                let (l, s, ac) = (Some(h), Some(x), Some(a));
                check_dist(&model.transitions[h][x][a], model.level_sizes[h + 1], l, s, ac, &mut out);
                let r = &model.rewards[h][x][a];
                let mut total = 0.0;
                for &(v, p) in r.outcomes() {
                    if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                        out.push(violation(ViolationKind::RewardOutOfRange, l, s, ac, format!("reward value {v} outside [0, 1]")));
                    }
                    if p < 0.0 || !p.is_finite() {
                        out.push(violation(ViolationKind::NegativeProbability, l, s, ac, format!("reward probability {p}")));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > PROB_TOL {
                    out.push(violation(ViolationKind::NotNormalized, l, s, ac, format!("reward probabilities sum to {total}")));
                }
            }
        }
    }
    if out.is_empty() {
        check_cumulative(model, &mut out);
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidModel(out))
    }
}

fn check_dist(d: &SparseDist, n: usize, level: Option<usize>, state: Option<usize>, action: Option<usize>, out: &mut Vec<Violation>) {
    let what = if level.is_some() { "transition" } else { "initial distribution" };
    for &(i, p) in d.entries() {
        if i >= n {
            out.push(violation(ViolationKind::IndexOutOfRange, level, state, action, format!("{what} points to state {i}, level has {n}")));
        }
        if p < 0.0 || !p.is_finite() {
            out.push(violation(ViolationKind::NegativeProbability, level, state, action, format!("{what} has probability {p} at {i}")));
        }
    }
    let total = d.total();
    if (total - 1.0).abs() > PROB_TOL {
        out.push(violation(ViolationKind::NotNormalized, level, state, action, format!("{what} sums to {total}")));
    }
}

// Largest achievable cumulative reward over reachable paths.
fn check_cumulative(model: &TabularCdp, out: &mut Vec<Violation>) {
    let h_max = model.horizon;
    let mut reach: Vec<Vec<bool>> = model.level_sizes.iter().map(|&n| vec![false; n]).collect();
    for &(x, p) in model.initial.entries() {
        if p > 0.0 {
            reach[0][x] = true;
        }
    }
    for h in 0..h_max {
        for x in 0..model.level_sizes[h] {
            if !reach[h][x] {
                continue;
            }
            for a in 0..model.actions {
                for &(y, p) in model.transitions[h][x][a].entries() {
                    if p > 0.0 {
                        reach[h + 1][y] = true;
                    }
                }
            }
        }
    }
    let mut best = vec![0.0; model.level_sizes[h_max]];
    for h in (0..h_max).rev() {
        let mut cur = vec![0.0; model.level_sizes[h]];
        for x in 0..model.level_sizes[h] {
            if !reach[h][x] {
                continue;
            }
            for a in 0..model.actions {
                let tail = model.transitions[h][x][a]
                    .entries()
                    .iter()
                    .filter(|e| e.1 > 0.0)
                    .map(|e| best[e.0])
                    .fold(0.0, f64::max);
                let total = model.rewards[h][x][a].max_value() + tail;
                if total > cur[x] {
                    cur[x] = total;
                }
            }
        }
        best = cur;
    }
    for &(x, p) in model.initial.entries() {
        if p > 0.0 && best[x] > 1.0 + PROB_TOL {
            out.push(violation(
                ViolationKind::CumulativeReward,
                Some(0),
                Some(x),
                None,
                format!("a reachable path from this state collects reward {}", best[x]),
            ));
        }
    }
}

// ── Policies ──

/// A (possibly stochastic) non-stationary policy: `probs[h][x][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    probs: Vec<Vec<Vec<f64>>>,
}

impl Policy {
    /// A deterministic policy from chosen actions `choices[h][x]`.
    pub fn deterministic(actions: usize, choices: &[Vec<usize>]) -> Self {
        let probs = choices
            .iter()
            .map(|level| {
                level
                    .iter()
                    .map(|&a| {
                        let mut row = vec![0.0; actions];
                        row[a] = 1.0;
                        row
                    })
                    .collect()
            })
            .collect();
        Self { probs }
    }

    pub fn uniform(model: &TabularCdp) -> Self {
        let k = model.actions;
        let probs = (0..model.horizon)
            .map(|h| vec![vec![1.0 / k as f64; k]; model.level_sizes[h]])
            .collect();
        Self { probs }
    }

    pub fn from_probs(probs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        for (h, level) in probs.iter().enumerate() {
            for (x, row) in level.iter().enumerate() {
                let total: f64 = row.iter().sum();
                if row.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidModel(vec![violation(
                        ViolationKind::NotNormalized,
                        Some(h),
                        Some(x),
                        None,
                        format!("policy row sums to {total}"),
                    )]));
                }
            }
        }
        Ok(Self { probs })
    }

    pub fn horizon(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self, h: usize, x: usize) -> &[f64] {
        &self.probs[h][x]
    }

    pub fn prob(&self, h: usize, x: usize, a: usize) -> f64 {
        self.probs[h][x][a]
    }

    /// The chosen action if the policy is deterministic at `(h, x)`.
    pub fn action(&self, h: usize, x: usize) -> Option<usize> {
        self.probs[h][x].iter().position(|&p| p == 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, h: usize, x: usize, rng: &mut R) -> usize {
        if let Some(a) = self.action(h, x) {
            return a;
        }
        sample_index(self.probs[h][x].iter().copied().enumerate(), rng)
    }

    pub fn check_shape(&self, model: &TabularCdp) -> Result<()> {
        let ok = self.probs.len() == model.horizon
            && self.probs.iter().enumerate().all(|(h, level)| {
                level.len() == model.level_sizes[h] && level.iter().all(|row| row.len() == model.actions)
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Structure("policy shape does not match model".into()))
        }
    }
}

// ── Planning ──

/// Output of exact planning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// `q[h][x][a]` for decision levels.
    pub q: Vec<Vec<Vec<f64>>>,
    /// `v[h][x]` for levels `0..=H` (the terminal level is all zeros).
    pub v: Vec<Vec<f64>>,
    /// Greedy deterministic policy, lowest action index on ties.
    pub policy: Policy,
    /// Expected return of `policy` from the initial distribution.
    pub value: f64,
}

impl PlanResult {
    /// Expected value of `f(r, x') = r + V(x')` under the model at `(h, x, a)`.
    pub fn q_value(&self, h: usize, x: usize, a: usize) -> f64 {
        self.q[h][x][a]
    }
}

/// Backward dynamic programming on a validated model.
pub fn plan(model: &TabularCdp) -> PlanResult {
    let h_max = model.horizon;
    let mut v: Vec<Vec<f64>> = vec![Vec::new(); h_max + 1];
    v[h_max] = vec![0.0; model.level_sizes[h_max]];
    let mut q = vec![Vec::new(); h_max];
    let mut choices = vec![Vec::new(); h_max];
    for h in (0..h_max).rev() {
        let n = model.level_sizes[h];
        let mut qh = Vec::with_capacity(n);
        let mut vh = Vec::with_capacity(n);
        let mut ch = Vec::with_capacity(n);
        for x in 0..n {
            let row: Vec<f64> = (0..model.actions)
                .map(|a| {
                    let next: f64 = model.transitions[h][x][a].entries().iter().map(|&(y, p)| p * v[h + 1][y]).sum();
                    model.rewards[h][x][a].mean() + next
                })
                .collect();
            let mut best = 0;
            for a in 1..row.len() {
                if row[a] > row[best] {
                    best = a;
                }
            }
            vh.push(row[best]);
            ch.push(best);
            qh.push(row);
        }
        q[h] = qh;
        v[h] = vh;
        choices[h] = ch;
    }
    let value = model.initial.entries().iter().map(|&(x, p)| p * v[0][x]).sum();
    PlanResult {
        q,
        v,
        policy: Policy::deterministic(model.actions, &choices),
        value,
    }
}

// ── Evaluation ──

/// State distributions at every level `0..=H` when `policy` runs in `model`.
pub fn occupancies(model: &TabularCdp, policy: &Policy) -> Result<Vec<Vec<f64>>> {
    policy.check_shape(model)?;
    let mut out = Vec::with_capacity(model.horizon + 1);
    out.push(model.initial.to_dense(model.level_sizes[0]));
    for h in 0..model.horizon {
        let cur = &out[h];
        let mut next = vec![0.0; model.level_sizes[h + 1]];
        for (x, &mass) in cur.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (a, &pa) in policy.probs(h, x).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                for &(y, p) in model.transitions[h][x][a].entries() {
                    next[y] += mass * pa * p;
                }
            }
        }
        out.push(next);
    }
    Ok(out)
}

/// State distribution at level `h` (0 ≤ h ≤ H).
pub fn occupancy(model: &TabularCdp, policy: &Policy, h: usize) -> Result<Vec<f64>> {
    if h > model.horizon {
        return Err(Error::LevelOutOfRange {
            level: h,
            horizon: model.horizon,
        });
    }
    let mut all = occupancies(model, policy)?;
    Ok(all.swap_remove(h))
}

/// Expected cumulative reward of `policy` in `model`.
pub fn policy_value(model: &TabularCdp, policy: &Policy) -> Result<f64> {
    let occ = occupancies(model, policy)?;
    let mut total = 0.0;
    for (h, level_occ) in occ.iter().enumerate().take(model.horizon) {
        for (x, &mass) in level_occ.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (a, &pa) in policy.probs(h, x).iter().enumerate() {
                total += mass * pa * model.rewards[h][x][a].mean();
            }
        }
    }
    Ok(total)
}

// ── Sampling ──

/// One episode: `states` has `H + 1` entries, `actions` and `rewards` `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub stream: StreamId,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Rolls out one episode with an arbitrary action chooser `choose(h, x, rng)`.
pub fn sample_with<F>(model: &TabularCdp, rng: &mut StreamRng, mut choose: F) -> Trajectory
where
    F: FnMut(usize, usize, &mut StreamRng) -> usize,
{
    let mut states = Vec::with_capacity(model.horizon + 1);
    let mut actions = Vec::with_capacity(model.horizon);
    let mut rewards = Vec::with_capacity(model.horizon);
    let mut x = model.initial.sample(rng);
    states.push(x);
    for h in 0..model.horizon {
        let a = choose(h, x, rng);
        let r = model.rewards[h][x][a].sample(rng);
        let y = model.transitions[h][x][a].sample(rng);
        actions.push(a);
        rewards.push(r);
        states.push(y);
        x = y;
    }
    Trajectory {
        states,
        actions,
        rewards,
        stream: rng.id().clone(),
    }
}

pub fn sample_trajectory(model: &TabularCdp, policy: &Policy, rng: &mut StreamRng) -> Trajectory {
    sample_with(model, rng, |h, x, r| policy.sample(h, x, r))
}

// ── Candidates and classes ──

/// A model together with its exact plan (and factored form, when it has one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub model: TabularCdp,
    pub plan: PlanResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factored: Option<FactoredMdp>,
}

impl Candidate {
    pub fn new(model: TabularCdp) -> Self {
        let plan = plan(&model);
        Self {
            model,
            plan,
            factored: None,
        }
    }

    pub fn from_factored(factored: FactoredMdp) -> Result<Self> {
        let model = crate::factored::expand(&factored)?;
        let mut c = Self::new(model);
        c.factored = Some(factored);
        Ok(c)
    }

    pub fn policy(&self) -> &Policy {
        &self.plan.policy
    }

    pub fn value(&self) -> f64 {
        self.plan.value
    }

    pub(crate) fn factored_or_err(&self) -> Result<&FactoredMdp> {
        self.factored
            .as_ref()
            .ok_or_else(|| Error::Structure("factored misfit needs models with factored transitions".into()))
    }
}

/// A finite class of candidate models sharing one shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelClass {
    members: Vec<Candidate>,
}

impl ModelClass {
    pub fn new(models: Vec<TabularCdp>) -> Result<Self> {
        Self::from_candidates(models.into_iter().map(Candidate::new).collect())
    }

    pub fn from_factored(models: Vec<FactoredMdp>) -> Result<Self> {
        let members = models.into_iter().map(Candidate::from_factored).collect::<Result<Vec<_>>>()?;
        Self::from_candidates(members)
    }

    pub fn from_candidates(members: Vec<Candidate>) -> Result<Self> {
        let first = members.first().ok_or(Error::Empty("model class"))?;
        if let Some(bad) = members.iter().position(|c| !c.model.same_shape(&first.model)) {
            return Err(Error::Structure(format!("model {bad} has a different shape from model 0")));
        }
        Ok(Self { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, i: usize) -> &Candidate {
        &self.members[i]
    }

    pub fn members(&self) -> &[Candidate] {
        &self.members
    }

    pub fn horizon(&self) -> usize {
        self.members[0].model.horizon()
    }

    pub fn actions(&self) -> usize {
        self.members[0].model.actions()
    }

    pub fn level_sizes(&self) -> &[usize] {
        self.members[0].model.level_sizes()
    }

    pub(crate) fn check_compatible(&self, truth: &Candidate) -> Result<()> {
        if truth.model.same_shape(&self.members[0].model) {
            Ok(())
        } else {
            Err(Error::Structure("true model has a different shape from the class".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::random::{random_tabular, RandomTabular};
    use crate::rng::SeedStreams;

    fn small(seed: u64) -> TabularCdp {
        let spec = RandomTabular {
            horizon: 3,
            actions: 2,
            states: 3,
            branching: 2,
            reward_support: 2,
        };
        random_tabular(&spec, &mut SeedStreams::new(seed).stream("model", 0))
    }

    // Independent oracle: enumerate every deterministic policy and evaluate
    // each by forward propagation.
    fn brute_force_best(model: &TabularCdp) -> f64 {
        let cells: Vec<(usize, usize)> = (0..model.horizon())
            .flat_map(|h| (0..model.states(h)).map(move |x| (h, x)))
            .collect();
        let k = model.actions();
        let total = k.pow(cells.len() as u32);
        let mut best = f64::NEG_INFINITY;
        for code in 0..total {
            let mut c = code;
            let mut choices: Vec<Vec<usize>> = (0..model.horizon()).map(|h| vec![0; model.states(h)]).collect();
            for &(h, x) in &cells {
                choices[h][x] = c % k;
                c /= k;
            }
            let v = policy_value(model, &Policy::deterministic(k, &choices)).unwrap();
            best = best.max(v);
        }
        best
    }

    #[test]
    fn planning_matches_policy_enumeration() {
        for seed in 0..5 {
            let m = small(seed);
            let p = plan(&m);
            let bf = brute_force_best(&m);
            assert!((p.value - bf).abs() < 1e-12, "seed {seed}: {} vs {bf}", p.value);
            assert!((policy_value(&m, &p.policy).unwrap() - p.value).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_go_to_lowest_action() {
        let m = TabularCdp::new(
            3,
            vec![1, 1],
            SparseDist::point(0),
            vec![vec![vec![SparseDist::point(0); 3]]],
            vec![vec![vec![
                RewardDist::deterministic(0.2),
                RewardDist::deterministic(0.5),
                RewardDist::deterministic(0.5),
            ]]],
        )
        .unwrap();
        assert_eq!(plan(&m).policy.action(0, 0), Some(1));
    }

    #[test]
    fn occupancies_are_distributions() {
        let m = small(3);
        let occ = occupancies(&m, &Policy::uniform(&m)).unwrap();
        assert_eq!(occ.len(), m.horizon() + 1);
        for level in occ {
            assert!((level.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monte_carlo_return_matches_value() {
        let m = small(4);
        let pi = Policy::uniform(&m);
        let exact = policy_value(&m, &pi).unwrap();
        let streams = SeedStreams::new(11);
        let n = 20_000;
        let mean: f64 = (0..n)
            .map(|i| sample_trajectory(&m, &pi, &mut streams.stream("mc", i)).total_reward())
            .sum::<f64>()
            / n as f64;
        // Returns lie in [0, 1]: 5 standard errors is at most 5 * 0.5 / sqrt(n).
        assert!((mean - exact).abs() < 5.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn validation_reports_every_location() {
        let bad_row = SparseDist::new(vec![(0, 0.7)]);
        let m = TabularCdp::from_parts_unchecked(
            2,
            vec![1, 1],
            SparseDist::point(0),
            vec![vec![vec![bad_row, SparseDist::point(3)]]],
            vec![vec![vec![RewardDist::deterministic(0.1), RewardDist::deterministic(1.5)]]],
        )
        .unwrap();
        let Err(Error::InvalidModel(v)) = validate(&m) else {
            panic!("expected violations")
        };
        assert!(v.iter().any(|v| v.kind == ViolationKind::NotNormalized && v.action == Some(0)));
        assert!(v.iter().any(|v| v.kind == ViolationKind::IndexOutOfRange && v.action == Some(1)));
        assert!(v.iter().any(|v| v.kind == ViolationKind::RewardOutOfRange && v.level == Some(0)));
    }

    #[test]
    fn cumulative_reward_checked_on_reachable_paths() {
        // State 1 at level 0 is unreachable, so its large reward is harmless;
        // the reachable path collects 0.6 + 0.6.
        let r = |v| RewardDist::deterministic(v);
        let m = TabularCdp::from_parts_unchecked(
            1,
            vec![2, 1, 1],
            SparseDist::point(0),
            vec![
                vec![vec![SparseDist::point(0)], vec![SparseDist::point(0)]],
                vec![vec![SparseDist::point(0)]],
            ],
            vec![vec![vec![r(0.6)], vec![r(1.0)]], vec![vec![r(0.6)]]],
        )
        .unwrap();
        let Err(Error::InvalidModel(v)) = validate(&m) else {
            panic!("expected a cumulative-reward violation")
        };
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::CumulativeReward);
    }
}
