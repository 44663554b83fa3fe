//! Random instance generators for tests, diagnostics and experiments.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cdp::{RewardDist, SparseDist, TabularCdp};
use crate::factored::{FactoredMdp, FactoredReward};

/// Shape of a random tabular model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomTabular {
    pub horizon: usize,
    pub actions: usize,
    /// States per level (every level, including the terminal one).
    pub states: usize,
    /// Support size of each transition row (capped at the level size).
    pub branching: usize,
    /// Support size of each reward distribution.
    pub reward_support: usize,
}

impl Default for RandomTabular {
    fn default() -> Self {
        Self {
            horizon: 3,
            actions: 2,
            states: 4,
            branching: 2,
            reward_support: 2,
        }
    }
}

fn random_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.05).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// A random model whose rewards lie in `[0, 1/H]`, so every path collects at
/// most one unit of reward.
pub fn random_tabular<R: Rng + ?Sized>(spec: &RandomTabular, rng: &mut R) -> TabularCdp {
    let initial = SparseDist::from_dense(&random_simplex(spec.states, rng));
    random_tabular_with_initial(spec, initial, rng)
}

fn random_tabular_with_initial<R: Rng + ?Sized>(spec: &RandomTabular, initial: SparseDist, rng: &mut R) -> TabularCdp {
    let (h_max, k, n) = (spec.horizon, spec.actions, spec.states);
    let cap = 1.0 / h_max as f64;
    let mut transitions = Vec::with_capacity(h_max);
    let mut rewards = Vec::with_capacity(h_max);
    for _ in 0..h_max {
        let mut th = Vec::with_capacity(n);
        let mut rh = Vec::with_capacity(n);
        for _ in 0..n {
            let mut ta = Vec::with_capacity(k);
            let mut ra = Vec::with_capacity(k);
            for _ in 0..k {
                let b = spec.branching.clamp(1, n);
                let support = sample(rng, n, b).into_vec();
                let probs = random_simplex(b, rng);
                ta.push(SparseDist::new(support.into_iter().zip(probs).collect()));
                let m = spec.reward_support.max(1);
                let values: Vec<f64> = (0..m).map(|_| cap * rng.gen::<f64>()).collect();
                let probs = random_simplex(m, rng);
                ra.push(RewardDist::new(&values, &probs).expect("matching lengths"));
            }
            th.push(ta);
            rh.push(ra);
        }
        transitions.push(th);
        rewards.push(rh);
    }
    TabularCdp::new(k, vec![n; h_max + 1], initial, transitions, rewards).expect("generator produces valid models")
}

/// `size` random models of the same shape with independent dynamics and
/// rewards but a common initial distribution (the environment's context
/// distribution is not something models disagree about).
pub fn random_tabular_class<R: Rng + ?Sized>(spec: &RandomTabular, size: usize, rng: &mut R) -> Vec<TabularCdp> {
    let initial = SparseDist::from_dense(&random_simplex(spec.states, rng));
    (0..size).map(|_| random_tabular_with_initial(spec, initial.clone(), rng)).collect()
}

/// Shape of a random factored model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFactored {
    pub horizon: usize,
    pub actions: usize,
    pub d: usize,
    pub num_values: usize,
    pub max_parents: usize,
}

impl Default for RandomFactored {
    fn default() -> Self {
        Self {
            horizon: 2,
            actions: 2,
            d: 3,
            num_values: 2,
            max_parents: 2,
        }
    }
}

fn random_cpts<R: Rng + ?Sized>(
    spec: &RandomFactored,
    parents: &[Vec<usize>],
    rng: &mut R,
) -> Vec<Vec<Vec<Vec<f64>>>> {
    (0..spec.horizon)
        .map(|_| {
            parents
                .iter()
                .map(|pa| {
                    let rows = spec.num_values.pow(pa.len() as u32) * spec.actions;
                    (0..rows).map(|_| random_simplex(spec.num_values, rng)).collect()
                })
                .collect()
        })
        .collect()
}

/// A random factored model with random parent sets, CPTs, initial law and a
/// state-dependent reward table bounded by `1/H` per level.
pub fn random_factored<R: Rng + ?Sized>(spec: &RandomFactored, rng: &mut R) -> FactoredMdp {
    let d = spec.d;
    let parents: Vec<Vec<usize>> = (0..d)
        .map(|_| {
            let size = rng.gen_range(1..=spec.max_parents.clamp(1, d));
            let mut pa = sample(rng, d, size).into_vec();
            pa.sort_unstable();
            pa
        })
        .collect();
    let cpts = random_cpts(spec, &parents, rng);
    let initial = (0..d).map(|_| random_simplex(spec.num_values, rng)).collect();
    let states = spec.num_values.pow(d as u32);
    let cap = 1.0 / spec.horizon as f64;
    let table = (0..spec.horizon)
        .map(|_| (0..states).map(|_| cap * rng.gen::<f64>()).collect())
        .collect();
    FactoredMdp::new(
        spec.horizon,
        spec.actions,
        (0..spec.num_values as i64).collect(),
        parents,
        cpts,
        initial,
        FactoredReward::StateTable { table },
    )
    .expect("generator produces valid models")
}

/// `size` factored models sharing structure, initial law and reward, with
/// independent CPTs.
pub fn random_factored_class<R: Rng + ?Sized>(spec: &RandomFactored, size: usize, rng: &mut R) -> Vec<FactoredMdp> {
    let base = random_factored(spec, rng);
    let mut out = vec![base.clone()];
    while out.len() < size {
        let cpts = random_cpts(spec, &base.structure().parents, rng);
        out.push(base.with_cpts(cpts).expect("generator produces valid models"));
    }
    out
}
