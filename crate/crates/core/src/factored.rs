//! Factored MDPs: state variables with per-variable conditional probability
//! tables (CPTs) that depend on a fixed parent set and the action.
//!
//! A state `x ∈ O^d` is encoded as the index `Σ_i x_i · |O|^i` (variable 0
//! least significant). A parent configuration `x[pa_i]` is encoded the same
//! way over the listed parents, first parent least significant.

use serde::{Deserialize, Serialize};

use crate::cdp::{RewardDist, SparseDist, TabularCdp};
use crate::error::{Error, Result, Violation, ViolationKind};
use crate::PROB_TOL;

/// Default cap on the number of states per level produced by [`expand`].
pub const DEFAULT_EXPANSION_CAP: u128 = 1_000_000;

// ── Structure ──

/// Variable count, value alphabet size and parent sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactoredStructure {
    pub num_values: usize,
    pub parents: Vec<Vec<usize>>,
}

impl FactoredStructure {
    pub fn new(num_values: usize, parents: Vec<Vec<usize>>) -> Result<Self> {
        let d = parents.len();
        if d == 0 || num_values == 0 {
            return Err(Error::Structure("factored structure needs variables and values".into()));
        }
        for (i, pa) in parents.iter().enumerate() {
            if let Some(&p) = pa.iter().find(|&&p| p >= d) {
                return Err(Error::InvalidModel(vec![Violation {
                    kind: ViolationKind::BadParents,
                    level: None,
                    state: None,
                    action: None,
                    detail: format!("variable {i} lists parent {p}, only {d} variables"),
                }]));
            }
        }
        Ok(Self { num_values, parents })
    }

    pub fn d(&self) -> usize {
        self.parents.len()
    }

    /// `|O|^d`, without overflow.
    pub fn state_count(&self) -> u128 {
        (self.num_values as u128).saturating_pow(self.d() as u32)
    }

    pub fn parent_configs(&self, i: usize) -> usize {
        self.num_values.pow(self.parents[i].len() as u32)
    }

    pub fn value_of(&self, state: usize, i: usize) -> usize {
        (state / self.num_values.pow(i as u32)) % self.num_values
    }

    pub fn decode(&self, state: usize) -> Vec<usize> {
        let mut s = state;
        (0..self.d())
            .map(|_| {
                let v = s % self.num_values;
                s /= self.num_values;
                v
            })
            .collect()
    }

    pub fn encode(&self, values: &[usize]) -> usize {
        values.iter().rev().fold(0, |acc, &v| acc * self.num_values + v)
    }

    pub fn parent_index(&self, i: usize, values: &[usize]) -> usize {
        self.parents[i]
            .iter()
            .rev()
            .fold(0, |acc, &p| acc * self.num_values + values[p])
    }

    /// Length of the ζ/χ factorisation vectors: `Σ_i K · |O|^{|pa_i|}`.
    pub fn factor_dim(&self, actions: usize) -> usize {
        (0..self.d()).map(|i| actions * self.parent_configs(i)).sum()
    }

    /// Free parameters per level: `Σ_i K · |O|^{1 + |pa_i|}`.
    pub fn level_parameters(&self, actions: usize) -> usize {
        self.factor_dim(actions) * self.num_values
    }
}

// ── Rewards ──

/// Deterministic, action-independent reward specifications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FactoredReward {
    /// No reward anywhere.
    Zero,
    /// Reward 1 at `level` when no variable takes the value labelled `label`.
    AvoidValue { level: usize, label: i64 },
    /// Reward 1 at `level` when variable `var` does not take value `label`.
    VarAvoids { level: usize, var: usize, label: i64 },
    /// Explicit reward per level and encoded state.
    StateTable { table: Vec<Vec<f64>> },
}

// ── Models ──

/// A factored layered MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FactoredDoc", into = "FactoredDoc")]
pub struct FactoredMdp {
    horizon: usize,
    actions: usize,
    labels: Vec<i64>,
    structure: FactoredStructure,
    cpts: Vec<Vec<Vec<Vec<f64>>>>,
    initial: Vec<Vec<f64>>,
    reward: FactoredReward,
}

impl FactoredMdp {
    /// `cpts[h][i][u * K + a][o]` is `P(x'_i = o | x[pa_i] = u, a)` at level `h`;
    /// `initial[i]` is the (independent) initial law of variable `i`.
    pub fn new(
        horizon: usize,
        actions: usize,
        labels: Vec<i64>,
        parents: Vec<Vec<usize>>,
        cpts: Vec<Vec<Vec<Vec<f64>>>>,
        initial: Vec<Vec<f64>>,
        reward: FactoredReward,
    ) -> Result<Self> {
        let structure = FactoredStructure::new(labels.len(), parents)?;
        let m = Self {
            horizon,
            actions,
            labels,
            structure,
            cpts,
            initial,
            reward,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn structure(&self) -> &FactoredStructure {
        &self.structure
    }

    pub fn reward_spec(&self) -> &FactoredReward {
        &self.reward
    }

    pub fn initial(&self) -> &[Vec<f64>] {
        &self.initial
    }

    pub fn cpt_row(&self, h: usize, i: usize, u: usize, a: usize) -> &[f64] {
        &self.cpts[h][i][u * self.actions + a]
    }

    pub fn cpts(&self) -> &[Vec<Vec<Vec<f64>>>] {
        &self.cpts
    }

    /// The same model with different CPTs (structure, initial law and reward kept).
    pub fn with_cpts(&self, cpts: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        let m = Self {
            cpts,
            ..self.clone()
        };
        m.validate()?;
        Ok(m)
    }

    /// Total number of CPT entries over all levels.
    pub fn parameter_count(&self) -> usize {
        self.horizon * self.structure.level_parameters(self.actions)
    }

    pub fn label_index(&self, label: i64) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::Structure(format!("value label {label} is not in the alphabet")))
    }

    pub fn reward_at(&self, h: usize, state: usize) -> Result<f64> {
        Ok(match &self.reward {
            FactoredReward::Zero => 0.0,
            FactoredReward::AvoidValue { level, label } => {
                let v = self.label_index(*label)?;
                let hit = (0..self.structure.d()).any(|i| self.structure.value_of(state, i) == v);
                if h == *level && !hit {
                    1.0
                } else {
                    0.0
                }
            }
            FactoredReward::VarAvoids { level, var, label } => {
                let v = self.label_index(*label)?;
                if h == *level && self.structure.value_of(state, *var) != v {
                    1.0
                } else {
                    0.0
                }
            }
            FactoredReward::StateTable { table } => table
                .get(h)
                .and_then(|row| row.get(state))
                .copied()
                .ok_or_else(|| Error::Structure(format!("reward table has no entry for level {h} state {state}")))?,
        })
    }

    fn validate(&self) -> Result<()> {
        let s = &self.structure;
        let (d, nv, k) = (s.d(), s.num_values, self.actions);
        if self.horizon == 0 || k == 0 {
            return Err(Error::Structure("factored model needs a horizon and actions".into()));
        }
        if self.cpts.len() != self.horizon {
            return Err(Error::Structure(format!("expected CPTs for {} levels", self.horizon)));
        }
        if self.initial.len() != d || self.initial.iter().any(|r| r.len() != nv) {
            return Err(Error::Structure(format!("initial law must be {d} rows of {nv} values")));
        }
        let mut out = Vec::new();
        let mut check_row = |row: &[f64], level: Option<usize>, action: Option<usize>, what: String| {
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                out.push(Violation {
                    kind: ViolationKind::NegativeProbability,
                    level,
                    state: None,
                    action,
                    detail: what.clone(),
                });
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                out.push(Violation {
                    kind: ViolationKind::NotNormalized,
                    level,
                    state: None,
                    action,
                    detail: format!("{what} sums to {total}"),
                });
            }
        };
        for (i, row) in self.initial.iter().enumerate() {
            check_row(row, None, None, format!("initial law of variable {i}"));
        }
        for h in 0..self.horizon {
            if self.cpts[h].len() != d {
                return Err(Error::Structure(format!("level {h}: expected {d} CPTs")));
            }
            for i in 0..d {
                let rows = s.parent_configs(i) * k;
                if self.cpts[h][i].len() != rows || self.cpts[h][i].iter().any(|r| r.len() != nv) {
                    return Err(Error::Structure(format!(
                        "level {h} variable {i}: expected {rows} rows of {nv} values"
                    )));
                }
                for (row_ix, row) in self.cpts[h][i].iter().enumerate() {
                    let (u, a) = (row_ix / k, row_ix % k);
                    check_row(row, Some(h), Some(a), format!("CPT of variable {i} at parent config {u}"));
                }
            }
        }
        if let FactoredReward::AvoidValue { label, .. } | FactoredReward::VarAvoids { label, .. } = &self.reward {
            self.label_index(*label)?;
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(out))
        }
    }
}

// ── Expansion ──

/// Expands a factored model into the equivalent tabular model.
pub fn expand(model: &FactoredMdp) -> Result<TabularCdp> {
    expand_with_cap(model, DEFAULT_EXPANSION_CAP)
}

pub fn expand_with_cap(model: &FactoredMdp, cap: u128) -> Result<TabularCdp> {
    let s = &model.structure;
    let count = s.state_count();
    if count > cap {
        return Err(Error::Capacity { states: count, cap });
    }
    let n = count as usize;
    let d = s.d();
    let k = model.actions;

    let initial = product_dist(s, (0..d).map(|i| model.initial[i].as_slice()));
    let mut transitions = Vec::with_capacity(model.horizon);
    let mut rewards = Vec::with_capacity(model.horizon);
    for h in 0..model.horizon {
        let mut th = Vec::with_capacity(n);
        let mut rh = Vec::with_capacity(n);
        for x in 0..n {
            let values = s.decode(x);
            let us: Vec<usize> = (0..d).map(|i| s.parent_index(i, &values)).collect();
            let r = model.reward_at(h, x)?;
            th.push(
                (0..k)
                    .map(|a| product_dist(s, (0..d).map(|i| model.cpt_row(h, i, us[i], a))))
                    .collect(),
            );
            rh.push(vec![RewardDist::deterministic(r); k]);
        }
        transitions.push(th);
        rewards.push(rh);
    }
    TabularCdp::new(k, vec![n; model.horizon + 1], initial, transitions, rewards)
}

// Product of independent per-variable laws, as a sparse distribution.
fn product_dist<'a>(s: &FactoredStructure, rows: impl Iterator<Item = &'a [f64]>) -> SparseDist {
    let mut acc: Vec<(usize, f64)> = vec![(0, 1.0)];
    let mut stride = 1;
    for row in rows {
        let mut next = Vec::with_capacity(acc.len());
        for &(idx, p) in &acc {
            for (o, &q) in row.iter().enumerate() {
                if q != 0.0 {
                    next.push((idx + o * stride, p * q));
                }
            }
        }
        acc = next;
        stride *= s.num_values;
    }
    SparseDist::new(acc)
}

// ── Serialisation ──

#[derive(Serialize, Deserialize)]
struct FactoredDoc {
    horizon: usize,
    actions: usize,
    values: Vec<i64>,
    parents: Vec<Vec<usize>>,
    cpts: Vec<Vec<Vec<Vec<f64>>>>,
    initial: Vec<Vec<f64>>,
    #[serde(default = "zero_reward")]
    reward: FactoredReward,
}

fn zero_reward() -> FactoredReward {
    FactoredReward::Zero
}

impl TryFrom<FactoredDoc> for FactoredMdp {
    type Error = Error;
    fn try_from(d: FactoredDoc) -> Result<Self> {
        FactoredMdp::new(d.horizon, d.actions, d.values, d.parents, d.cpts, d.initial, d.reward)
    }
}

impl From<FactoredMdp> for FactoredDoc {
    fn from(m: FactoredMdp) -> Self {
        FactoredDoc {
            horizon: m.horizon,
            actions: m.actions,
            values: m.labels,
            parents: m.structure.parents,
            cpts: m.cpts,
            initial: m.initial,
            reward: m.reward,
        }
    }
}
