//! Profiles of states under a class of state-action functions, and learners
//! that only ever see those profiles.
//!
//! A profile of a level-`h` state `x` under `G = {g_1, …, g_m}` is the
//! `m × K` matrix `[g_j(h, x, a)]`. A learner restricted to profiles treats
//! two states with equal profiles as the same observation and two actions with
//! equal profile columns as the same choice.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::benchmarks::separation::{build_separation_family, build_tilde_family, path_actions};
use crate::cdp::{plan, policy_value, Candidate, Policy, TabularCdp};
use crate::error::{Error, Result};
use crate::factored::expand;
use crate::rng::StreamRng;

/// A state-action table `values[h][x][a]` over decision levels.
pub type StateActionTable = Vec<Vec<Vec<f64>>>;

// ── Function classes ──

/// A finite class of state-action functions on a common layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GClass {
    pub functions: Vec<StateActionTable>,
}

impl GClass {
    /// `OP(M)`: the optimal Q-functions of every model followed by their
    /// optimal (greedy, lowest-index) policies as 0/1 tables.
    pub fn optimal_q_and_policies(models: &[TabularCdp]) -> Result<Self> {
        check_layout(models)?;
        let plans: Vec<_> = models.iter().map(plan).collect();
        let mut functions: Vec<StateActionTable> = plans.iter().map(|p| p.q.clone()).collect();
        for (m, p) in models.iter().zip(&plans) {
            functions.push(policy_table(m, &p.policy));
        }
        Ok(Self { functions })
    }

    /// Only the optimal Q-functions.
    pub fn optimal_q(models: &[TabularCdp]) -> Result<Self> {
        check_layout(models)?;
        Ok(Self {
            functions: models.iter().map(|m| plan(m).q).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

fn check_layout(models: &[TabularCdp]) -> Result<()> {
    let first = models.first().ok_or(Error::Empty("model list"))?;
    if models.iter().any(|m| !m.same_shape(first)) {
        return Err(Error::Inconsistent("models do not share a layout".into()));
    }
    Ok(())
}

fn policy_table(model: &TabularCdp, policy: &Policy) -> StateActionTable {
    (0..model.horizon())
        .map(|h| (0..model.states(h)).map(|x| policy.probs(h, x).to_vec()).collect())
        .collect()
}

/// The profile matrix `rows[j][a] = g_j(h, x, a)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GProfile {
    pub level: usize,
    pub rows: Vec<Vec<f64>>,
}

impl GProfile {
    /// Actions grouped by identical profile columns; groups are ordered by
    /// their smallest action.
    pub fn action_classes(&self) -> Vec<Vec<usize>> {
        let k = self.rows.first().map_or(0, Vec::len);
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for a in 0..k {
            match classes
                .iter_mut()
                .find(|c| self.rows.iter().all(|r| r[c[0]].to_bits() == r[a].to_bits()))
            {
                Some(c) => c.push(a),
                None => classes.push(vec![a]),
            }
        }
        classes
    }
}

pub fn g_profile(g: &GClass, h: usize, x: usize) -> Result<GProfile> {
    let rows = g
        .functions
        .iter()
        .map(|f| {
            let level = f.get(h).ok_or(Error::LevelOutOfRange {
                level: h,
                horizon: f.len(),
            })?;
            level
                .get(x)
                .cloned()
                .ok_or_else(|| Error::Structure(format!("level {h} has no state {x}")))
        })
        .collect::<Result<_>>()?;
    Ok(GProfile { level: h, rows })
}

// ── Profile equivalence ──

/// One place where two environments produced different observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileMismatch {
    pub truth: usize,
    pub actions: Vec<usize>,
    pub level: usize,
    /// `"profile"` or `"reward"`.
    pub what: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub d: usize,
    pub equivalent: bool,
    pub sequences_checked: usize,
    pub mismatches: Vec<ProfileMismatch>,
}

/// Deterministic rollout of an open-loop action sequence.
fn rollout(model: &TabularCdp, actions: &[usize]) -> Result<(Vec<usize>, Vec<f64>)> {
    let point = |d: &crate::cdp::SparseDist| match d.entries() {
        [(x, _)] => Ok(*x),
        _ => Err(Error::Structure("profile comparison needs deterministic dynamics".into())),
    };
    let mut x = point(model.initial())?;
    let mut states = vec![x];
    let mut rewards = Vec::new();
    for (h, &a) in actions.iter().enumerate() {
        let r = model.reward(h, x, a);
        if r.outcomes().len() != 1 {
            return Err(Error::Structure("profile comparison needs deterministic rewards".into()));
        }
        rewards.push(r.mean());
        x = point(model.transition(h, x, a))?;
        states.push(x);
    }
    Ok((states, rewards))
}

/// Compares, for every truth index and every action sequence, the profiles
/// (and rewards) observed in `left[truth]` under `gl` with those observed in
/// `right[truth]` under `gr`.
pub fn compare_profiles(
    left: &[TabularCdp],
    gl: &GClass,
    right: &[TabularCdp],
    gr: &GClass,
    sequences: &[Vec<usize>],
) -> Result<Vec<ProfileMismatch>> {
    if left.len() != right.len() {
        return Err(Error::Inconsistent("families differ in size".into()));
    }
    let mut out = Vec::new();
    for (truth, (l, r)) in left.iter().zip(right).enumerate() {
        for seq in sequences {
            let (ls, lr) = rollout(l, seq)?;
            let (rs, rr) = rollout(r, seq)?;
            for h in 0..seq.len() {
                if g_profile(gl, h, ls[h])?.rows != g_profile(gr, h, rs[h])?.rows {
                    out.push(ProfileMismatch {
                        truth,
                        actions: seq.clone(),
                        level: h,
                        what: "profile",
                    });
                }
                if lr[h] != rr[h] {
                    out.push(ProfileMismatch {
                        truth,
                        actions: seq.clone(),
                        level: h,
                        what: "reward",
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Every full action sequence of the separation layout: one of the `2^d`
/// paths followed by action +1 at the two single-action levels.
pub fn separation_sequences(d: usize) -> Vec<Vec<usize>> {
    (0..1usize << d)
        .map(|p| {
            let mut s = path_actions(d, p);
            s.extend([1, 1]);
            s
        })
        .collect()
}

/// Checks that `{P^p}` observed through `OP({P^p})` is indistinguishable from
/// `{P̃^p}` observed through `OP({P̃^p})`.
pub fn profile_equivalence_report(d: usize) -> Result<EquivalenceReport> {
    let family: Vec<TabularCdp> = build_separation_family(d)?.iter().map(expand).collect::<Result<_>>()?;
    let tilde = build_tilde_family(d)?;
    let g = GClass::optimal_q_and_policies(&family)?;
    let gt = GClass::optimal_q_and_policies(&tilde)?;
    let sequences = separation_sequences(d);
    let mismatches = compare_profiles(&family, &g, &tilde, &gt, &sequences)?;
    Ok(EquivalenceReport {
        d,
        equivalent: mismatches.is_empty(),
        sequences_checked: family.len() * sequences.len(),
        mismatches,
    })
}

pub fn profile_equivalence_check(d: usize) -> Result<bool> {
    Ok(profile_equivalence_report(d)?.equivalent)
}

// ── Over-parameterized recovery ──

/// Decodes every state at the reward level of the separation layout from its
/// Q-profile under the over-parameterized class; returns `(recovered, total)`.
pub fn overparam_recovery(d: usize) -> Result<(usize, usize)> {
    use crate::benchmarks::separation::{build_overparam_class, separation_structure, RewardVariant, LABELS};
    let class = build_overparam_class(d)?;
    let models: Vec<TabularCdp> = class.models.iter().map(expand).collect::<Result<_>>()?;
    let g = GClass::optimal_q(&models)?;
    let s = separation_structure(d)?;
    let level = d + 1;
    let total = models[0].states(level);
    let mut recovered = 0;
    for x in 0..total {
        let prof = g_profile(&g, level, x)?;
        let mut decoded = Vec::with_capacity(d);
        for var in 0..d {
            let mut value = LABELS.iter().position(|&l| l == 0).expect("0 is a label");
            for label in [-1, 1, 2] {
                let j = class
                    .index_of(RewardVariant::Avoid { var, label }, 0)
                    .expect("variant present");
                if prof.rows[j][0] == 0.0 {
                    value = LABELS.iter().position(|&l| l == label).expect("label present");
                }
            }
            decoded.push(value);
        }
        if s.encode(&decoded) == x {
            recovered += 1;
        }
    }
    Ok((recovered, total))
}

// ── Profile-restricted learner ──

/// What the profile-restricted learner did in one environment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnerOutcome {
    pub trajectories: u64,
    pub found: bool,
    /// Actions of the best trajectory seen.
    pub actions: Vec<usize>,
    /// Exact value in the environment of the open-loop policy replaying them.
    pub value: f64,
}

#[derive(Default)]
struct Node {
    exhausted: Vec<bool>,
}

/// Settings of [`profile_restricted_learner`].
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    /// An episode whose return reaches this value ends the search.
    pub target: f64,
    /// Maximum number of episodes.
    pub budget: u64,
    /// `forced[h] = Some(a)`: level `h` offers the single action `a`.
    pub forced: Vec<Option<usize>>,
}

impl LearnerConfig {
    /// Settings for the separation layout with `d` variables: target return 1
    /// and action +1 at the two single-action levels.
    pub fn separation(d: usize, budget: u64) -> Self {
        let mut forced = vec![None; d];
        forced.extend([Some(1), Some(1)]);
        Self {
            target: 1.0,
            budget,
            forced,
        }
    }
}

/// Randomized exhaustive search over profile-distinguishable branches.
///
/// At each visited state the learner groups actions by their profile columns
/// and picks uniformly among groups whose subtree still has untried leaves,
/// playing the smallest action of the group. An episode whose return reaches
/// the target stops the search. Without any information before the reward,
/// any such learner needs on average `(L + 1) / 2` episodes over `L` equally
/// likely leaves.
pub fn profile_restricted_learner(
    env: &TabularCdp,
    g: &GClass,
    cfg: &LearnerConfig,
    rng: &mut StreamRng,
) -> Result<LearnerOutcome> {
    let (target, budget) = (cfg.target, cfg.budget);
    let horizon = env.horizon();
    let mut tree: HashMap<Vec<usize>, Node> = HashMap::new();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut episodes = 0;
    let mut found = false;
    while episodes < budget {
        if tree.get(&Vec::new()).is_some_and(|n| n.exhausted.iter().all(|&e| e)) {
            break;
        }
        episodes += 1;
        let mut episode_rng = rng.child("episode", episodes);
        let mut prefix: Vec<usize> = Vec::new();
        let mut actions = Vec::with_capacity(horizon);
        let mut total = 0.0;
        let mut x = env.initial().sample(&mut episode_rng);
        for h in 0..horizon {
            let classes = match cfg.forced.get(h).copied().flatten() {
                Some(a) if a < env.actions() => vec![vec![a]],
                Some(a) => return Err(Error::Config(format!("forced action {a} at level {h} out of range"))),
                None => g_profile(g, h, x)?.action_classes(),
            };
            let node = tree.entry(prefix.clone()).or_insert_with(|| Node {
                exhausted: vec![false; classes.len()],
            });
            let open: Vec<usize> = (0..classes.len()).filter(|&c| !node.exhausted[c]).collect();
            let c = if open.is_empty() { 0 } else { open[episode_rng.gen_range(0..open.len())] };
            let a = classes[c][0];
            total += env.reward(h, x, a).sample(&mut episode_rng);
            x = env.transition(h, x, a).sample(&mut episode_rng);
            actions.push(a);
            prefix.push(c);
        }
        // Mark the leaf and propagate exhaustion upward.
        for depth in (0..horizon).rev() {
            let node = tree.get_mut(&prefix[..depth]).expect("visited node");
            node.exhausted[prefix[depth]] = true;
            if !node.exhausted.iter().all(|&e| e) {
                break;
            }
        }
        if best.as_ref().is_none_or(|(v, _)| total > *v) {
            best = Some((total, actions));
        }
        if total >= target {
            found = true;
            break;
        }
    }
    let actions = best.map(|(_, a)| a).unwrap_or_default();
    let value = replay_value(env, &actions)?;
    Ok(LearnerOutcome {
        trajectories: episodes,
        found,
        actions,
        value,
    })
}

/// Exact value of playing `actions` open-loop (action 0 when empty).
fn replay_value(env: &TabularCdp, actions: &[usize]) -> Result<f64> {
    let choices: Vec<Vec<usize>> = (0..env.horizon())
        .map(|h| vec![actions.get(h).copied().unwrap_or(0); env.states(h)])
        .collect();
    policy_value(env, &Policy::deterministic(env.actions(), &choices))
}

/// Convenience: the class `OP` of a family of candidates.
pub fn op_of_candidates(members: &[Candidate]) -> Result<GClass> {
    let models: Vec<TabularCdp> = members.iter().map(|c| c.model.clone()).collect();
    GClass::optimal_q_and_policies(&models)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdp::SparseDist;
    use crate::rng::SeedStreams;

    #[test]
    fn equivalence_holds_for_small_d() {
        for d in 1..=3 {
            let r = profile_equivalence_report(d).unwrap();
            assert!(r.equivalent, "d={d}: {:?}", r.mismatches);
            assert_eq!(r.sequences_checked, 1 << (2 * d));
        }
    }

    #[test]
    fn perturbed_twin_is_detected() {
        // Sending mismatches to the all-zero state pays reward and changes
        // the reward-level Q-profile.
        let d = 2;
        let family: Vec<TabularCdp> = build_separation_family(d).unwrap().iter().map(|m| expand(m).unwrap()).collect();
        let bad: Vec<TabularCdp> = family
            .iter()
            .enumerate()
            .map(|(p, m)| {
                let s = crate::benchmarks::separation::separation_structure(d).unwrap();
                let on = s.encode(&crate::benchmarks::separation::path_state(d, p));
                let zero = s.encode(&[1, 1]);
                m.map_transitions(|h, x, _, row| if h == d && x != on { SparseDist::point(zero) } else { row.clone() })
                    .unwrap()
            })
            .collect();
        let g = GClass::optimal_q_and_policies(&family).unwrap();
        let gb = GClass::optimal_q_and_policies(&bad).unwrap();
        let m = compare_profiles(&family, &g, &bad, &gb, &separation_sequences(d)).unwrap();
        assert!(m.iter().any(|x| x.what == "reward"));
        assert!(m.iter().any(|x| x.what == "profile" && x.level == d + 1));
    }

    #[test]
    fn overparam_recovers_every_reward_level_state() {
        assert_eq!(overparam_recovery(2).unwrap(), (16, 16));
    }

    #[test]
    fn action_classes_group_equal_columns() {
        let p = GProfile {
            level: 0,
            rows: vec![vec![1.0, 0.0, 1.0], vec![0.5, 0.5, 0.5]],
        };
        assert_eq!(p.action_classes(), vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn learner_finds_the_path_within_all_leaves() {
        let d = 3;
        let family: Vec<TabularCdp> = build_separation_family(d).unwrap().iter().map(|m| expand(m).unwrap()).collect();
        let g = GClass::optimal_q_and_policies(&family).unwrap();
        let streams = SeedStreams::new(5);
        for (p, env) in family.iter().enumerate() {
            let mut rng = streams.stream("learner", p as u64);
            let out = profile_restricted_learner(env, &g, &LearnerConfig::separation(d, 1000), &mut rng).unwrap();
            assert!(out.found && out.value == 1.0);
            assert!((1..=8).contains(&out.trajectories), "p={p} {out:?}");
            assert_eq!(&out.actions[..d], &path_actions(d, p)[..]);
        }
        let mut rng = streams.stream("learner", 99);
        let out = profile_restricted_learner(&family[7], &g, &LearnerConfig::separation(d, 0), &mut rng).unwrap();
        assert!(!out.found && out.trajectories == 0);
    }
}
