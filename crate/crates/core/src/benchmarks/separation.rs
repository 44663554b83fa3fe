//! The factored family that separates model-based learning from
//! value/policy-profile learners, its "tilde" twin, and the over-parameterized
//! class whose Q-profiles recover every state.
//!
//! Layout with `d` variables over values `{−1, 0, 1, 2}` and actions
//! `{−1, +1}` (action index 0 is −1, index 1 is +1). The horizon is `d + 2`:
//!
//! - levels `l < d`: variable `l` is set to the action label, every other
//!   variable is copied;
//! - level `d` (both actions identical): variable `i` keeps its value when it
//!   equals `p_i`, otherwise it becomes 2;
//! - level `d + 1` (both actions identical): reward `1{no variable is 2}`,
//!   identity transition.
//!
//! The initial state is all zeros and every variable is its own only parent.
//! Path `p` is indexed by `Σ_i b_i 2^i` with `b_i = 1` iff `p_i = +1`.

use crate::cdp::{SparseDist, TabularCdp};
use crate::error::{Error, Result};
use crate::factored::{expand, FactoredMdp, FactoredReward, FactoredStructure};

/// Value labels of every variable.
pub const LABELS: [i64; 4] = [-1, 0, 1, 2];
/// Value index of label 2, the "mismatch" marker.
const TWO: usize = 3;
/// Value index of label 0, the initial value.
const ZERO: usize = 1;
/// Largest `d` accepted by the builders (the tabular twin has `4^d` states).
pub const MAX_SEPARATION_D: usize = 9;

// ── Paths ──

/// Action indices of path `index` (entry `l` is the action taken at level `l`).
pub fn path_actions(d: usize, index: usize) -> Vec<usize> {
    (0..d).map(|i| (index >> i) & 1).collect()
}

/// Inverse of [`path_actions`].
pub fn path_index(actions: &[usize]) -> usize {
    actions.iter().enumerate().map(|(i, &a)| (a & 1) << i).sum()
}

/// Action index to its value index (−1 → 0, +1 → 2).
fn action_value(a: usize) -> usize {
    if a == 0 {
        0
    } else {
        2
    }
}

fn check_d(d: usize) -> Result<()> {
    if d == 0 || d > MAX_SEPARATION_D {
        return Err(Error::Config(format!("separation family needs 1 ≤ d ≤ {MAX_SEPARATION_D}, got {d}")));
    }
    Ok(())
}

/// The value-index vector of the level-`d` state reached by following `p`.
pub fn path_state(d: usize, index: usize) -> Vec<usize> {
    path_actions(d, index).into_iter().map(action_value).collect()
}

// ── Families ──

fn point(o: usize) -> Vec<f64> {
    let mut row = vec![0.0; LABELS.len()];
    row[o] = 1.0;
    row
}

/// The factored model `P^p` with the given reward specification.
pub fn separation_model(d: usize, path: usize, reward: FactoredReward) -> Result<FactoredMdp> {
    check_d(d)?;
    let target = path_state(d, path);
    let nv = LABELS.len();
    let k = 2;
    let cpts = (0..d + 2)
        .map(|h| {
            (0..d)
                .map(|i| {
                    (0..nv * k)
                        .map(|row| {
                            let (u, a) = (row / k, row % k);
                            if h < d {
                                point(if i == h { action_value(a) } else { u })
                            } else if h == d {
                                point(if u == target[i] { u } else { TWO })
                            } else {
                                point(u)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    FactoredMdp::new(
        d + 2,
        k,
        LABELS.to_vec(),
        (0..d).map(|i| vec![i]).collect(),
        cpts,
        vec![point(ZERO); d],
        reward,
    )
}

fn avoid_two(d: usize) -> FactoredReward {
    FactoredReward::AvoidValue { level: d + 1, label: 2 }
}

/// All `2^d` models `P^p`, in path-index order.
pub fn build_separation_family(d: usize) -> Result<Vec<FactoredMdp>> {
    check_d(d)?;
    (0..1usize << d).map(|p| separation_model(d, p, avoid_two(d))).collect()
}

/// The tabular twins `P̃^p`: identical to `P^p` except that at level `d` any
/// state other than `p` jumps to the all-2 state.
pub fn build_tilde_family(d: usize) -> Result<Vec<TabularCdp>> {
    build_separation_family(d)?
        .iter()
        .enumerate()
        .map(|(p, m)| {
            let s = m.structure();
            let on_path = s.encode(&path_state(d, p));
            let all_two = s.encode(&vec![TWO; d]);
            expand(m)?.map_transitions(|h, x, _, row| {
                if h == d && x != on_path {
                    SparseDist::point(all_two)
                } else {
                    row.clone()
                }
            })
        })
        .collect()
}

// ── Over-parameterization ──

/// Which reward a member of the over-parameterized class carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum RewardVariant {
    /// The original `1{no variable is 2}`.
    Original,
    /// `1{x_var ≠ label}`.
    Avoid { var: usize, label: i64 },
}

/// The over-parameterized class: every path model paired with the original
/// reward and each of the `3d` rewards `1{x_i ≠ j}`, `j ∈ {−1, 1, 2}`.
/// Members are grouped by reward variant, paths innermost.
#[derive(Debug, Clone)]
pub struct OverparamClass {
    pub d: usize,
    pub models: Vec<FactoredMdp>,
    pub variants: Vec<RewardVariant>,
}

impl OverparamClass {
    /// Index of the member with `variant` on path `path`.
    pub fn index_of(&self, variant: RewardVariant, path: usize) -> Option<usize> {
        let v = self.variants.iter().position(|&x| x == variant)?;
        Some(v * (1 << self.d) + path)
    }
}

pub fn build_overparam_class(d: usize) -> Result<OverparamClass> {
    check_d(d)?;
    let mut variants = vec![RewardVariant::Original];
    for var in 0..d {
        for label in [-1, 1, 2] {
            variants.push(RewardVariant::Avoid { var, label });
        }
    }
    let mut models = Vec::with_capacity(variants.len() << d);
    for v in &variants {
        let reward = match *v {
            RewardVariant::Original => avoid_two(d),
            RewardVariant::Avoid { var, label } => FactoredReward::VarAvoids { level: d + 1, var, label },
        };
        for p in 0..1usize << d {
            models.push(separation_model(d, p, reward.clone())?);
        }
    }
    Ok(OverparamClass { d, models, variants })
}

/// Structure shared by every member of the family.
pub fn separation_structure(d: usize) -> Result<FactoredStructure> {
    check_d(d)?;
    FactoredStructure::new(LABELS.len(), (0..d).map(|i| vec![i]).collect())
}
