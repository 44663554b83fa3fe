//! Witnessed model misfit, average Bellman error and factored misfit —
//! exactly (occupancy-weighted sums) and from samples.
//!
//! Exact quantities roll states in with the roll-in model's policy *in the
//! true model*; the action at the inspected level follows either the target
//! model's policy or the uniform distribution.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::cdp::{occupancy, sample_with, Candidate, Policy, TabularCdp, Trajectory};
use crate::error::{Error, Result};
use crate::factored::FactoredStructure;
use crate::rng::StreamRng;
use crate::test_functions::{combine, joint_law, law_tv, CellMeasure, Outcome, TestFunctionClass};

/// Agreement required between the two forms of the Bellman error.
pub const FORM_TOL: f64 = 1e-9;

/// How the action at the inspected level is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// From the (target or data-collecting) model's policy.
    Policy,
    /// Uniformly over actions.
    Uniform,
}

// ── Exact quantities ──

fn check_pair(a: &Candidate, b: &Candidate) -> Result<()> {
    if a.model.same_shape(&b.model) {
        Ok(())
    } else {
        Err(Error::Structure("models do not share states, actions and horizon".into()))
    }
}

/// Distribution of `x_h` when the roll-in model's policy runs in the true model.
pub fn roll_in_occupancy(roll_in: &Candidate, truth: &Candidate, h: usize) -> Result<Vec<f64>> {
    check_pair(roll_in, truth)?;
    truth.model.check_level(h)?;
    occupancy(&truth.model, roll_in.policy(), h)
}

fn action_weight(target: &Candidate, mode: ActionMode, h: usize, x: usize, a: usize) -> f64 {
    match mode {
        ActionMode::Policy => target.policy().prob(h, x, a),
        ActionMode::Uniform => 1.0 / target.model.actions() as f64,
    }
}

/// Per-cell signed measures `d(x) α(a|x) (P_{M'}(·|x,a) − P_{M*}(·|x,a))`.
pub fn exact_cells(occ: &[f64], target: &Candidate, truth: &Candidate, h: usize, mode: ActionMode) -> Vec<CellMeasure> {
    let mut cells = Vec::new();
    for (x, &d) in occ.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        for a in 0..truth.model.actions() {
            let w = d * action_weight(target, mode, h, x, a);
            if w == 0.0 {
                continue;
            }
            let mass = combine(&[
                (w, &joint_law(&target.model, h, x, a)),
                (-w, &joint_law(&truth.model, h, x, a)),
            ]);
            cells.push(CellMeasure { state: x, action: a, mass });
        }
    }
    cells
}

/// `W(M, M', h; F)` with actions from the target's policy.
pub fn witnessed_misfit_exact(
    roll_in: &Candidate,
    target: &Candidate,
    truth: &Candidate,
    h: usize,
    class: &TestFunctionClass,
) -> Result<f64> {
    witnessed_misfit_exact_with(roll_in, target, truth, h, class, ActionMode::Policy)
}

pub fn witnessed_misfit_exact_with(
    roll_in: &Candidate,
    target: &Candidate,
    truth: &Candidate,
    h: usize,
    class: &TestFunctionClass,
    mode: ActionMode,
) -> Result<f64> {
    check_pair(target, truth)?;
    let occ = roll_in_occupancy(roll_in, truth, h)?;
    misfit_from_occupancy(&occ, target, truth, h, class, mode)
}

pub fn misfit_from_occupancy(
    occ: &[f64],
    target: &Candidate,
    truth: &Candidate,
    h: usize,
    class: &TestFunctionClass,
    mode: ActionMode,
) -> Result<f64> {
    class.supremum(h, &exact_cells(occ, target, truth, h, mode))
}

/// Both forms of the average Bellman error `E_B(M, M', h)`:
/// `E[Q'(x,a) − r − V'(x')]` under the true model, and the model form
/// `E[E_{M'}[r + V'] − E_{M*}[r + V']]`.
pub fn bellman_error_forms(roll_in: &Candidate, target: &Candidate, truth: &Candidate, h: usize) -> Result<(f64, f64)> {
    check_pair(target, truth)?;
    let occ = roll_in_occupancy(roll_in, truth, h)?;
    Ok(bellman_forms_from_occupancy(&occ, target, truth, h))
}

fn bellman_forms_from_occupancy(occ: &[f64], target: &Candidate, truth: &Candidate, h: usize) -> (f64, f64) {
    let v_next = &target.plan.v[h + 1];
    let expect = |m: &TabularCdp, x: usize, a: usize| {
        m.reward(h, x, a).mean() + m.transition(h, x, a).entries().iter().map(|&(y, p)| p * v_next[y]).sum::<f64>()
    };
    let (mut q_form, mut model_form) = (0.0, 0.0);
    for (x, &d) in occ.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        for a in 0..truth.model.actions() {
            let w = d * target.policy().prob(h, x, a);
            if w == 0.0 {
                continue;
            }
            let truth_side = expect(&truth.model, x, a);
            q_form += w * (target.plan.q[h][x][a] - truth_side);
            model_form += w * (expect(&target.model, x, a) - truth_side);
        }
    }
    (q_form, model_form)
}

/// `E_B(M, M', h)`, checking that both forms agree.
pub fn bellman_error_exact(roll_in: &Candidate, target: &Candidate, truth: &Candidate, h: usize) -> Result<f64> {
    let (q_form, model_form) = bellman_error_forms(roll_in, target, truth, h)?;
    agree(q_form, model_form, h)
}

pub(crate) fn bellman_from_occupancy(occ: &[f64], target: &Candidate, truth: &Candidate, h: usize) -> Result<f64> {
    let (q_form, model_form) = bellman_forms_from_occupancy(occ, target, truth, h);
    agree(q_form, model_form, h)
}

fn agree(q_form: f64, model_form: f64, h: usize) -> Result<f64> {
    if (q_form - model_form).abs() > FORM_TOL {
        return Err(Error::Inconsistent(format!(
            "Bellman error forms disagree at level {h}: {q_form} vs {model_form}"
        )));
    }
    Ok(q_form)
}

fn check_structure(a: &FactoredStructure, b: &FactoredStructure) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Structure("factored models have different parent sets or alphabets".into()))
    }
}

/// `W_F(M, M', h)`: expected sum over variables of the TV between CPT rows,
/// with `x_h` rolled in by `π_M` in the true model and uniform actions.
pub fn factored_misfit_exact(roll_in: &Candidate, target: &Candidate, truth: &Candidate, h: usize) -> Result<f64> {
    let occ = roll_in_occupancy(roll_in, truth, h)?;
    factored_from_occupancy(&occ, target, truth, h)
}

pub(crate) fn factored_from_occupancy(occ: &[f64], target: &Candidate, truth: &Candidate, h: usize) -> Result<f64> {
    let (ft, fs) = (target.factored_or_err()?, truth.factored_or_err()?);
    check_structure(ft.structure(), fs.structure())?;
    let s = fs.structure();
    let k = fs.actions();
    let mut total = 0.0;
    for (x, &d) in occ.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let values = s.decode(x);
        for a in 0..k {
            for i in 0..s.d() {
                let u = s.parent_index(i, &values);
                let tv: f64 = ft
                    .cpt_row(h, i, u, a)
                    .iter()
                    .zip(fs.cpt_row(h, i, u, a))
                    .map(|(p, q)| (p - q).abs())
                    .sum();
                total += d * tv / k as f64;
            }
        }
    }
    Ok(total)
}

// ── Data ──

/// One observed transition at the inspected level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisfitSample {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next: usize,
}

impl MisfitSample {
    pub fn outcome(&self) -> Outcome {
        Outcome::new(self.reward, self.next)
    }
}

/// A batch of transitions at one level, with how it was collected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisfitData {
    pub level: usize,
    /// Id of the model whose policy rolled states in, if known.
    pub roll_in: Option<usize>,
    pub action_mode: ActionMode,
    pub seed: Option<u64>,
    pub samples: Vec<MisfitSample>,
}

#[derive(Serialize, Deserialize)]
struct SampleLine {
    level: usize,
    roll_in: Option<usize>,
    action_mode: ActionMode,
    seed: Option<u64>,
    #[serde(flatten)]
    sample: MisfitSample,
}

impl MisfitData {
    /// Extracts level-`h` transitions from full trajectories.
    pub fn from_trajectories(trajs: &[Trajectory], h: usize, action_mode: ActionMode, roll_in: Option<usize>) -> Self {
        let samples = trajs
            .iter()
            .map(|t| MisfitSample {
                state: t.states[h],
                action: t.actions[h],
                reward: t.rewards[h],
                next: t.states[h + 1],
            })
            .collect();
        Self {
            level: h,
            roll_in,
            action_mode,
            seed: trajs.first().map(|t| t.stream.seed),
            samples,
        }
    }

    /// Writes one JSON object per sample, each carrying the batch metadata.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.samples {
            let line = SampleLine {
                level: self.level,
                roll_in: self.roll_in,
                action_mode: self.action_mode,
                seed: self.seed,
                sample: *s,
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut out: Option<MisfitData> = None;
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let l: SampleLine = serde_json::from_str(&line)?;
            let data = out.get_or_insert_with(|| MisfitData {
                level: l.level,
                roll_in: l.roll_in,
                action_mode: l.action_mode,
                seed: l.seed,
                samples: Vec::new(),
            });
            if l.level != data.level || l.action_mode != data.action_mode {
                return Err(Error::Structure("mixed levels or action modes in one dataset".into()));
            }
            data.samples.push(l.sample);
        }
        out.ok_or(Error::Empty("dataset"))
    }
}

/// Rolls in `roll_in` in the true model up to level `h`, draws the level-`h`
/// action uniformly, and records the transition. Trajectories stop there.
pub fn collect_uniform(truth: &TabularCdp, roll_in: &Policy, h: usize, n: usize, rng: &mut StreamRng) -> Result<MisfitData> {
    truth.check_level(h)?;
    roll_in.check_shape(truth)?;
    let k = truth.actions();
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = truth.initial().sample(rng);
        for l in 0..h {
            let a = roll_in.sample(l, x, rng);
            x = truth.transition(l, x, a).sample(rng);
        }
        let a = rand::Rng::gen_range(rng, 0..k);
        let reward = truth.reward(h, x, a).sample(rng);
        let next = truth.transition(h, x, a).sample(rng);
        samples.push(MisfitSample {
            state: x,
            action: a,
            reward,
            next,
        });
    }
    Ok(MisfitData {
        level: h,
        roll_in: None,
        action_mode: ActionMode::Uniform,
        seed: Some(rng.id().seed),
        samples,
    })
}

/// `n` full on-policy trajectories.
pub fn collect_on_policy(truth: &TabularCdp, policy: &Policy, n: usize, rng: &mut StreamRng) -> Result<Vec<Trajectory>> {
    policy.check_shape(truth)?;
    Ok((0..n).map(|_| sample_with(truth, rng, |h, x, r| policy.sample(h, x, r))).collect())
}

// ── Estimators ──

/// An estimate with the metadata needed to reproduce it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub n: usize,
    pub seed: Option<u64>,
    pub mode: ActionMode,
}

// Cells of (1/N) Σ_n ρ_n (P_{M'}(·|x_n,a_n) − δ_{z_n}), grouped by (x, a).
fn empirical_cells(data: &MisfitData, target: &Candidate, weight: impl Fn(usize, usize) -> f64) -> Vec<CellMeasure> {
    let n = data.samples.len() as f64;
    let mut groups: BTreeMap<(usize, usize), Vec<(Outcome, f64)>> = BTreeMap::new();
    for s in &data.samples {
        let rho = weight(s.state, s.action);
        if rho == 0.0 {
            continue;
        }
        groups.entry((s.state, s.action)).or_default().push((s.outcome(), rho / n));
    }
    groups
        .into_iter()
        .map(|((x, a), observed)| {
            let total: f64 = observed.iter().map(|e| e.1).sum();
            let mut sorted = observed;
            sorted.sort_by_key(|e| e.0);
            let law = joint_law(&target.model, data.level, x, a);
            CellMeasure {
                state: x,
                action: a,
                mass: combine(&[(total, &law), (-1.0, &sorted)]),
            }
        })
        .collect()
}

fn require(data: &MisfitData, mode: ActionMode, what: &str) -> Result<()> {
    if data.samples.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if data.action_mode != mode {
        return Err(Error::Structure(format!("{what} needs {mode:?} action data")));
    }
    Ok(())
}

fn check_data(data: &MisfitData, target: &Candidate) -> Result<()> {
    target.model.check_level(data.level)?;
    let n_states = target.model.states(data.level);
    let n_next = target.model.states(data.level + 1);
    let k = target.model.actions();
    if data.samples.iter().any(|s| s.state >= n_states || s.next >= n_next || s.action >= k) {
        return Err(Error::Structure("sample indices outside the model's level sets".into()));
    }
    Ok(())
}

/// Importance-weighted empirical misfit
/// `max_f (1/N) Σ_n ρ_n (E_{M'}[f(x_n, a_n, ·)] − f(x_n, a_n, r_n, x'_n))`
/// with `ρ_n = K π_{M'}(a_n | x_n)`, from uniform-action data.
pub fn witnessed_misfit_estimate(data: &MisfitData, target: &Candidate, class: &TestFunctionClass) -> Result<Estimate> {
    require(data, ActionMode::Uniform, "misfit estimation")?;
    check_data(data, target)?;
    let k = target.model.actions() as f64;
    let h = data.level;
    let cells = empirical_cells(data, target, |x, a| k * target.policy().prob(h, x, a));
    Ok(Estimate {
        value: class.supremum(h, &cells)?,
        n: data.samples.len(),
        seed: data.seed,
        mode: ActionMode::Uniform,
    })
}

/// Unweighted empirical factored misfit over `{g_1 + … + g_d}` from
/// uniform-action data, maximised cell by cell `(i, x[pa_i], a)`.
pub fn factored_misfit_estimate(data: &MisfitData, target: &Candidate, structure: &FactoredStructure) -> Result<Estimate> {
    require(data, ActionMode::Uniform, "factored misfit estimation")?;
    check_data(data, target)?;
    let cells = empirical_cells(data, target, |_, _| 1.0);
    let class = TestFunctionClass::FactoredSum {
        structure: structure.clone(),
    };
    Ok(Estimate {
        value: class.supremum(data.level, &cells)?,
        n: data.samples.len(),
        seed: data.seed,
        mode: ActionMode::Uniform,
    })
}

/// Mean of `Q_M(x, a) − (r + V_M(x'))` over on-policy samples of `M`.
pub fn bellman_error_estimate(data: &MisfitData, target: &Candidate) -> Result<Estimate> {
    require(data, ActionMode::Policy, "Bellman error estimation")?;
    check_data(data, target)?;
    let h = data.level;
    let (q, v) = (&target.plan.q[h], &target.plan.v[h + 1]);
    let total: f64 = data
        .samples
        .iter()
        .map(|s| q[s.state][s.action] - (s.reward + v[s.next]))
        .sum();
    Ok(Estimate {
        value: total / data.samples.len() as f64,
        n: data.samples.len(),
        seed: data.seed,
        mode: ActionMode::Policy,
    })
}

/// Levels whose (estimated) Bellman error reaches `threshold`, in order.
pub fn qualifying_levels(errors: &[f64], threshold: f64) -> Vec<usize> {
    errors
        .iter()
        .enumerate()
        .filter(|(_, &e)| e >= threshold)
        .map(|(h, _)| h)
        .collect()
}

/// TV between the joint outcome laws of two models at `(h, x, a)`.
pub fn conditional_tv(a: &TabularCdp, b: &TabularCdp, h: usize, x: usize, act: usize) -> f64 {
    law_tv(&joint_law(a, h, x, act), &joint_law(b, h, x, act))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::random::{random_factored_class, random_tabular_class, RandomFactored, RandomTabular};
    use crate::cdp::{policy_value, ModelClass, RewardDist, SparseDist};
    use crate::rng::SeedStreams;
    use crate::test_functions::bellman_function;

    fn class(seed: u64, size: usize) -> ModelClass {
        let spec = RandomTabular {
            horizon: 3,
            actions: 2,
            states: 3,
            branching: 2,
            reward_support: 2,
        };
        ModelClass::new(random_tabular_class(&spec, size, &mut SeedStreams::new(seed).stream("class", 0))).unwrap()
    }

    #[test]
    fn misfit_vanishes_at_truth() {
        let c = class(1, 3);
        let truth = c.get(2);
        for f in [TestFunctionClass::tv_ball(), TestFunctionClass::bellman_class(&c)] {
            for m in c.members() {
                for h in 0..3 {
                    assert!(witnessed_misfit_exact(m, truth, truth, h, &f).unwrap().abs() < 1e-12);
                    assert!(bellman_error_exact(m, truth, truth, h).unwrap().abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn tv_misfit_hand_example() {
        // Two equally likely start states, one action; the models differ only
        // at start state 0, by TV 0.6.
        let build = |row: [f64; 2]| {
            crate::cdp::TabularCdp::new(
                1,
                vec![2, 2],
                SparseDist::from_dense(&[0.5, 0.5]),
                vec![vec![vec![SparseDist::from_dense(&row)], vec![SparseDist::point(1)]]],
                vec![vec![vec![RewardDist::deterministic(0.0)]; 2]],
            )
            .unwrap()
        };
        let truth = Candidate::new(build([0.7, 0.3]));
        let other = Candidate::new(build([0.4, 0.6]));
        let w = witnessed_misfit_exact(&truth, &other, &truth, 0, &TestFunctionClass::tv_ball()).unwrap();
        assert!((w - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bellman_witness_gives_bellman_error() {
        let c = class(2, 3);
        let truth = c.get(0);
        for m in c.members() {
            for t in c.members() {
                let only = TestFunctionClass::Finite {
                    functions: vec![bellman_function(&t.plan)],
                };
                for h in 0..3 {
                    let w = witnessed_misfit_exact(m, t, truth, h, &only).unwrap();
                    let e = bellman_error_exact(m, t, truth, h).unwrap();
                    assert!((w - e).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn simulation_lemma() {
        let c = class(3, 4);
        let truth = c.get(3);
        for m in c.members() {
            let lhs = m.value() - policy_value(&truth.model, m.policy()).unwrap();
            let rhs: f64 = (0..3).map(|h| bellman_error_exact(m, m, truth, h).unwrap()).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn bellman_error_matches_monte_carlo() {
        let c = class(4, 2);
        let (m, truth) = (c.get(0), c.get(1));
        let h = 1;
        let exact = bellman_error_exact(m, m, truth, h).unwrap();
        let trajs = collect_on_policy(&truth.model, m.policy(), 20_000, &mut SeedStreams::new(1).stream("eb", 0)).unwrap();
        let data = MisfitData::from_trajectories(&trajs, h, ActionMode::Policy, Some(0));
        let xs: Vec<f64> = data
            .samples
            .iter()
            .map(|s| m.plan.q[h][s.state][s.action] - s.reward - m.plan.v[h + 1][s.next])
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let se = (var / xs.len() as f64).sqrt();
        assert!((mean - exact).abs() < 3.5 * se, "{mean} vs {exact} (se {se})");
        let est = bellman_error_estimate(&data, m).unwrap();
        assert!((est.value - mean).abs() < 1e-12);
    }

    #[test]
    fn estimator_single_deterministic_sample() {
        // One action, deterministic move to state 1 with reward 0 in the truth;
        // the target predicts state 0. With F = TV ball, the estimate is
        // ρ · |P' − δ| summed = 1 · 2.
        let build = |next: usize| {
            crate::cdp::TabularCdp::new(
                1,
                vec![1, 2],
                SparseDist::point(0),
                vec![vec![vec![SparseDist::point(next)]]],
                vec![vec![vec![RewardDist::deterministic(0.0)]]],
            )
            .unwrap()
        };
        let target = Candidate::new(build(0));
        let data = MisfitData {
            level: 0,
            roll_in: None,
            action_mode: ActionMode::Uniform,
            seed: None,
            samples: vec![MisfitSample {
                state: 0,
                action: 0,
                reward: 0.0,
                next: 1,
            }],
        };
        let e = witnessed_misfit_estimate(&data, &target, &TestFunctionClass::tv_ball()).unwrap();
        assert_eq!(e.value, 2.0);
        assert!(matches!(
            witnessed_misfit_estimate(&MisfitData { samples: vec![], ..data }, &target, &TestFunctionClass::tv_ball()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn jsonl_roundtrip() {
        let c = class(5, 1);
        let m = c.get(0);
        let data = collect_uniform(&m.model, m.policy(), 1, 20, &mut SeedStreams::new(3).stream("d", 0)).unwrap();
        let mut buf = Vec::new();
        data.write_jsonl(&mut buf).unwrap();
        let back = MisfitData::read_jsonl(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, data);
    }

    fn factored_class(seed: u64, spec: &RandomFactored, size: usize) -> ModelClass {
        ModelClass::from_factored(random_factored_class(spec, size, &mut SeedStreams::new(seed).stream("f", 0))).unwrap()
    }

    #[test]
    fn factored_misfit_two_routes_agree() {
        // CPT route vs aggregation of joint-law differences over the factored class.
        let spec = RandomFactored::default();
        let c = factored_class(6, &spec, 3);
        let s = c.get(0).factored.as_ref().unwrap().structure().clone();
        let f = TestFunctionClass::FactoredSum { structure: s };
        let truth = c.get(0);
        for m in c.members() {
            for t in c.members() {
                for h in 0..spec.horizon {
                    let a = factored_misfit_exact(m, t, truth, h).unwrap();
                    let b = witnessed_misfit_exact_with(m, t, truth, h, &f, ActionMode::Uniform).unwrap();
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn factored_single_variable_equals_tv_ball() {
        let spec = RandomFactored {
            d: 1,
            num_values: 3,
            max_parents: 1,
            ..RandomFactored::default()
        };
        let c = factored_class(7, &spec, 2);
        let (m, truth) = (c.get(1), c.get(0));
        for h in 0..spec.horizon {
            let a = factored_misfit_exact(m, m, truth, h).unwrap();
            let b = witnessed_misfit_exact_with(m, m, truth, h, &TestFunctionClass::tv_ball(), ActionMode::Uniform).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn factored_supremum_matches_sign_enumeration() {
        // d = 2 binary variables with one parent each and one action: 4 cells
        // (u, o) per variable, 2^8 sign patterns in total.
        let spec = RandomFactored {
            horizon: 1,
            actions: 1,
            d: 2,
            num_values: 2,
            max_parents: 1,
        };
        let c = factored_class(8, &spec, 2);
        let (m, truth) = (c.get(1), c.get(0));
        let s = truth.factored.as_ref().unwrap().structure().clone();
        let occ = roll_in_occupancy(m, truth, 0).unwrap();
        let mut best = f64::NEG_INFINITY;
        for pattern in 0u32..256 {
            let g = |i: usize, u: usize, o: usize| if pattern >> (i * 4 + u * 2 + o) & 1 == 1 { 1.0 } else { -1.0 };
            let f = |x: usize, y: usize| {
                let (xv, yv) = (s.decode(x), s.decode(y));
                (0..2).map(|i| g(i, s.parent_index(i, &xv), yv[i])).sum::<f64>()
            };
            let mut v = 0.0;
            for (x, &mass) in occ.iter().enumerate().take(4) {
                for y in 0..4 {
                    v += mass * (m.model.transition(0, x, 0).prob(y) - truth.model.transition(0, x, 0).prob(y)) * f(x, y);
                }
            }
            best = best.max(v);
        }
        let exact = factored_misfit_exact(m, m, truth, 0).unwrap();
        assert!((best - exact).abs() < 1e-12, "{best} vs {exact}");
    }

    #[test]
    fn estimators_converge_and_centre_at_truth() {
        let spec = RandomFactored::default();
        let c = factored_class(9, &spec, 2);
        let (m, truth) = (c.get(1), c.get(0));
        let s = truth.factored.as_ref().unwrap().structure().clone();
        let h = 1;
        let exact = factored_misfit_exact(m, m, truth, h).unwrap();
        let streams = SeedStreams::new(2);
        let err = |n: usize| {
            (0..20)
                .map(|k| {
                    let d = collect_uniform(&truth.model, m.policy(), h, n, &mut streams.stream("fm", (n * 100 + k) as u64)).unwrap();
                    (factored_misfit_estimate(&d, m, &s).unwrap().value - exact).abs()
                })
                .sum::<f64>()
                / 20.0
        };
        let (e1, e2) = (err(200), err(20_000));
        assert!(e2 < e1 / 4.0, "{e1} -> {e2}");
    }

    #[test]
    fn qualifying_levels_in_order() {
        assert_eq!(qualifying_levels(&[0.1, 0.0, 0.3, 0.2], 0.2), vec![2, 3]);
    }
}
