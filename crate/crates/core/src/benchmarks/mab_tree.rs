//! The realizability lower-bound family: a `K`-ary tree of depth `H − 1`
//! whose leaves are arms of a multi-armed bandit.
//!
//! Level `h < H − 1` states are action histories of length `h`, encoded in
//! base `K` with the earliest action most significant. From a full history the
//! last action moves to level `H − 1` state `x*` (index 0) with probability
//! `0.5 + ε·1{history = a*}` and to `x'` (index 1) otherwise. Level `H − 1`
//! pays `1{x = x*}` under every action and leads to the single terminal state.

use crate::cdp::{ModelClass, RewardDist, SparseDist, TabularCdp};
use crate::error::{Error, Result};

/// Largest number of arms (models) the builder will enumerate.
pub const MAB_TREE_CAP: usize = 4096;

/// Builds the `K^{H−1}` models and returns the class with the index of the
/// model used as the environment: the last one, so that lowest-index tie
/// breaking does not pick the truth for free.
pub fn build_mab_tree_family(horizon: usize, actions: usize, eps: f64) -> Result<(ModelClass, usize)> {
    if horizon < 2 || actions < 2 {
        return Err(Error::Config("the tree family needs H ≥ 2 and K ≥ 2".into()));
    }
    if !(0.0..(1.0f64 / 8.0).sqrt()).contains(&eps) {
        return Err(Error::Config(format!("gap {eps} outside [0, √(1/8))")));
    }
    let arms = (actions as u128).checked_pow(horizon as u32 - 1).unwrap_or(u128::MAX);
    if arms > MAB_TREE_CAP as u128 {
        return Err(Error::ClassTooLarge {
            size: arms.min(usize::MAX as u128) as usize,
            cap: MAB_TREE_CAP,
        });
    }
    let arms = arms as usize;
    let models = (0..arms).map(|star| tree_model(horizon, actions, eps, star)).collect::<Result<Vec<_>>>()?;
    Ok((ModelClass::new(models)?, arms - 1))
}

fn tree_model(horizon: usize, k: usize, eps: f64, star: usize) -> Result<TabularCdp> {
    let mut level_sizes: Vec<usize> = (0..horizon - 1).map(|h| k.pow(h as u32)).collect();
    level_sizes.push(2);
    level_sizes.push(1);
    let zero = RewardDist::deterministic(0.0);
    let mut transitions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    for (h, &n) in level_sizes.iter().enumerate().take(horizon - 1) {
        let last = h == horizon - 2;
        transitions.push(
            (0..n)
                .map(|x| {
                    (0..k)
                        .map(|a| {
                            let child = x * k + a;
                            if last {
                                let p = 0.5 + if child == star { eps } else { 0.0 };
                                SparseDist::new(vec![(0, p), (1, 1.0 - p)])
                            } else {
                                SparseDist::point(child)
                            }
                        })
                        .collect()
                })
                .collect(),
        );
        rewards.push(vec![vec![zero.clone(); k]; n]);
    }
    transitions.push(vec![vec![SparseDist::point(0); k]; 2]);
    rewards.push(vec![vec![RewardDist::deterministic(1.0); k], vec![zero; k]]);
    TabularCdp::new(k, level_sizes, SparseDist::point(0), transitions, rewards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdp::{plan, policy_value, Policy};

    #[test]
    fn two_level_family() {
        let (c, truth) = build_mab_tree_family(2, 2, 0.1).unwrap();
        assert_eq!((c.len(), truth), (2, 1));
        let t = &c.get(truth).model;
        assert!((plan(t).value - 0.6).abs() < 1e-15);
        let other = Policy::deterministic(2, &[vec![0], vec![0, 0]]);
        assert!((policy_value(t, &other).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn every_model_values_its_own_arm() {
        let (c, _) = build_mab_tree_family(3, 2, 0.2).unwrap();
        assert_eq!(c.len(), 4);
        for m in c.members() {
            assert!((m.value() - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_policy_value() {
        let (c, truth) = build_mab_tree_family(3, 2, 0.1).unwrap();
        let m = &c.get(truth).model;
        let v = policy_value(m, &Policy::uniform(m)).unwrap();
        assert!((v - (0.5 + 0.1 / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_gap_makes_every_policy_optimal() {
        let (c, truth) = build_mab_tree_family(3, 3, 0.0).unwrap();
        let m = &c.get(truth).model;
        assert_eq!(plan(m).value, 0.5);
        assert_eq!(policy_value(m, &Policy::uniform(m)).unwrap(), 0.5);
    }

    #[test]
    fn caps_and_ranges() {
        assert!(build_mab_tree_family(3, 2, 0.4).is_err());
        assert!(matches!(build_mab_tree_family(14, 2, 0.1), Err(Error::ClassTooLarge { .. })));
    }
}
