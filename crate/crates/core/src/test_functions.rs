//! Discriminator classes `F` and the functions they contain.
//!
//! Every class is evaluated through one primitive: given, for each
//! state-action cell `(x, a)` at a level, a *signed measure* over joint
//! outcomes `(r, x')`, return `sup_{f ∈ F} Σ_cells Σ_z μ_cell(z) f(x, a, z)`.
//! Exact misfits feed weighted differences of conditional laws; empirical
//! estimates feed importance-weighted differences between model predictions
//! and observed outcomes. Infinite classes (TV ball, factored sums,
//! exponential-family duals) have closed-form suprema because their functions
//! may choose a different witness in every cell.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cdp::{occupancy, ModelClass, PlanResult, TabularCdp};
use crate::error::{Error, Result};
use crate::factored::FactoredStructure;

// ── Outcomes and laws ──

/// A joint outcome `(r, x')` of one transition.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Outcome {
    pub reward: f64,
    pub next: usize,
}

impl Outcome {
    pub fn new(reward: f64, next: usize) -> Self {
        // -0.0 and 0.0 must compare equal under total ordering.
        let reward = if reward == 0.0 { 0.0 } else { reward };
        Self { reward, next }
    }
}

impl PartialEq for Outcome {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Outcome {}

impl PartialOrd for Outcome {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Outcome {
    fn cmp(&self, other: &Self) -> Ordering {
        self.reward.total_cmp(&other.reward).then(self.next.cmp(&other.next))
    }
}

/// A finite signed measure over outcomes, sorted and merged.
pub type Measure = Vec<(Outcome, f64)>;

/// The joint law of `(r, x')` at `(h, x, a)`; reward and next state are
/// independent given the state-action pair.
pub fn joint_law(model: &TabularCdp, h: usize, x: usize, a: usize) -> Measure {
    let r = model.reward(h, x, a);
    let t = model.transition(h, x, a);
    let mut out = Vec::with_capacity(r.outcomes().len() * t.entries().len());
    for &(v, pr) in r.outcomes() {
        for &(y, py) in t.entries() {
            if pr * py != 0.0 {
                out.push((Outcome::new(v, y), pr * py));
            }
        }
    }
    out.sort_by_key(|e| e.0);
    out
}

/// `Σ_k c_k · μ_k` over sorted measures, merged on outcomes.
pub fn combine(parts: &[(f64, &[(Outcome, f64)])]) -> Measure {
    let mut all: Vec<(Outcome, f64)> = parts
        .iter()
        .flat_map(|(c, m)| m.iter().map(move |&(z, p)| (z, c * p)))
        .collect();
    all.sort_by_key(|e| e.0);
    let mut out: Measure = Vec::with_capacity(all.len());
    for (z, p) in all {
        match out.last_mut() {
            Some(last) if last.0 == z => last.1 += p,
            _ => out.push((z, p)),
        }
    }
    out
}

// ── Analytic suprema ──

/// TV distance in the `Σ|p − q|` convention with its maximising `±1` witness
/// `sign(p − q)` (zero where the two agree). Both vectors index one support.
pub fn tv_supremum(p: &[f64], q: &[f64]) -> Result<(f64, Vec<f64>)> {
    if p.len() != q.len() {
        return Err(Error::SupportMismatch(format!(
            "distributions over {} and {} outcomes",
            p.len(),
            q.len()
        )));
    }
    let witness: Vec<f64> = p.iter().zip(q).map(|(a, b)| sign(a - b)).collect();
    let value = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    Ok((value, witness))
}

/// TV between two outcome laws, aligning them on the union of supports.
pub fn law_tv(p: &[(Outcome, f64)], q: &[(Outcome, f64)]) -> f64 {
    combine(&[(1.0, p), (-1.0, q)]).iter().map(|e| e.1.abs()).sum()
}

/// Supremum over `{g_1 + … + g_d}` with independent `±1` witnesses: the sum of
/// the per-factor total variations.
pub fn factored_supremum(per_factor_tv: &[f64]) -> f64 {
    per_factor_tv.iter().sum()
}

/// Dual norm of the Euclidean unit ball: the Euclidean norm.
pub fn expfam_supremum(mean_diff: &[f64]) -> f64 {
    mean_diff.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

// ── Witness functions ──

/// Which models a Scheffé witness was built from: states are rolled in with
/// `roll_in`'s policy inside `reference`, actions follow `target`'s policy,
/// and the witness is the sign of `target`'s minus `reference`'s law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub roll_in: usize,
    pub reference: usize,
    pub target: usize,
    pub level: usize,
    pub sign: i8,
}

/// Tabulated values of a function at one state-action cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub level: usize,
    pub state: usize,
    pub action: usize,
    pub values: Vec<(Outcome, f64)>,
}

/// A function `f(h, x, a, r, x')`, zero wherever it is not tabulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableFunction {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Origin>,
    cells: Vec<TableCell>,
}

impl TableFunction {
    pub fn new(mut cells: Vec<TableCell>, origin: Option<Origin>) -> Self {
        cells.sort_by_key(|c| (c.level, c.state, c.action));
        for c in &mut cells {
            c.values.sort_by_key(|e| e.0);
        }
        Self { origin, cells }
    }

    pub fn cells(&self) -> &[TableCell] {
        &self.cells
    }

    fn cell(&self, h: usize, x: usize, a: usize) -> Option<&TableCell> {
        self.cells
            .binary_search_by_key(&(h, x, a), |c| (c.level, c.state, c.action))
            .ok()
            .map(|k| &self.cells[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessFunction {
    /// `sign · (r + V(x'))` with `values[h]` the value table of level `h`.
    Bellman { sign: f64, values: Vec<Vec<f64>> },
    Table(TableFunction),
}

impl WitnessFunction {
    pub fn eval(&self, h: usize, x: usize, a: usize, z: Outcome) -> f64 {
        match self {
            WitnessFunction::Bellman { sign, values } => sign * (z.reward + values[h + 1][z.next]),
            WitnessFunction::Table(t) => t
                .cell(h, x, a)
                .and_then(|c| c.values.binary_search_by(|e| e.0.cmp(&z)).ok().map(|k| c.values[k].1))
                .unwrap_or(0.0),
        }
    }

    /// `Σ_z μ(z) f(h, x, a, z)`.
    pub fn integrate(&self, h: usize, x: usize, a: usize, mass: &[(Outcome, f64)]) -> f64 {
        mass.iter().map(|&(z, m)| m * self.eval(h, x, a, z)).sum()
    }

    pub fn negated(&self) -> Self {
        match self {
            WitnessFunction::Bellman { sign, values } => WitnessFunction::Bellman {
                sign: -sign,
                values: values.clone(),
            },
            WitnessFunction::Table(t) => WitnessFunction::Table(TableFunction {
                origin: t.origin.map(|p| Origin { sign: -p.sign, ..p }),
                cells: t
                    .cells
                    .iter()
                    .map(|c| TableCell {
                        values: c.values.iter().map(|&(z, v)| (z, -v)).collect(),
                        ..c.clone()
                    })
                    .collect(),
            }),
        }
    }

    /// Largest absolute value over the function's (finite) domain.
    pub fn sup_norm(&self) -> f64 {
        match self {
            // Rewards lie in [0, 1], so |r + V| ≤ 1 + max |V|.
            WitnessFunction::Bellman { sign, values } => {
                sign.abs() * (1.0 + values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())))
            }
            WitnessFunction::Table(t) => t
                .cells
                .iter()
                .flat_map(|c| c.values.iter().map(|e| e.1.abs()))
                .fold(0.0, f64::max),
        }
    }

    fn same_values(&self, other: &Self) -> bool {
        match (self, other) {
            (WitnessFunction::Bellman { sign: s1, values: v1 }, WitnessFunction::Bellman { sign: s2, values: v2 }) => {
                s1 == s2 && v1 == v2
            }
            (WitnessFunction::Table(a), WitnessFunction::Table(b)) => a.cells == b.cells,
            _ => false,
        }
    }
}

/// `f(r, x') = r + V_{M'}(x')` for a planned target model.
pub fn bellman_function(target: &PlanResult) -> WitnessFunction {
    WitnessFunction::Bellman {
        sign: 1.0,
        values: target.v.clone(),
    }
}

// ── Classes ──

/// Sufficient statistics `T_h(r, x') = r · reward_coef + table[h + 1][x']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientStatistics {
    pub reward_coef: Vec<f64>,
    /// Indexed by level of the *next* state, then state.
    pub table: Vec<Vec<Vec<f64>>>,
}

impl SufficientStatistics {
    pub fn dim(&self) -> usize {
        self.reward_coef.len()
    }

    pub fn eval(&self, h: usize, z: Outcome) -> impl Iterator<Item = f64> + '_ {
        let row = &self.table[h + 1][z.next];
        self.reward_coef.iter().zip(row).map(move |(c, t)| z.reward * c + t)
    }
}

/// A mass assigned to one state-action cell at a fixed level.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMeasure {
    pub state: usize,
    pub action: usize,
    pub mass: Measure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TestFunctionClass {
    Finite { functions: Vec<WitnessFunction> },
    TvBall { bound: f64 },
    FactoredSum { structure: FactoredStructure },
    Scheffe { functions: Vec<WitnessFunction> },
    ExpFamily { statistics: SufficientStatistics },
}

impl TestFunctionClass {
    /// `{±(r + V_M)}` over every model in the class.
    pub fn bellman_class(class: &ModelClass) -> Self {
        let functions = class
            .members()
            .iter()
            .flat_map(|c| {
                let f = bellman_function(&c.plan);
                [f.clone(), f.negated()]
            })
            .collect();
        TestFunctionClass::Finite { functions }
    }

    pub fn tv_ball() -> Self {
        TestFunctionClass::TvBall { bound: 1.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunctionClass::Finite { .. } => "finite",
            TestFunctionClass::TvBall { .. } => "tv_ball",
            TestFunctionClass::FactoredSum { .. } => "factored_sum",
            TestFunctionClass::Scheffe { .. } => "scheffe",
            TestFunctionClass::ExpFamily { .. } => "exp_family",
        }
    }

    /// Explicitly enumerated functions, if the class is finite.
    pub fn functions(&self) -> Option<&[WitnessFunction]> {
        match self {
            TestFunctionClass::Finite { functions } | TestFunctionClass::Scheffe { functions } => Some(functions),
            _ => None,
        }
    }

    /// Checks the class invariants: symmetry and sup-norm bounds.
    pub fn check(&self) -> Result<()> {
        match self {
            TestFunctionClass::Finite { functions } | TestFunctionClass::Scheffe { functions } => {
                if functions.is_empty() {
                    return Err(Error::Empty("test function class"));
                }
                let limit = if matches!(self, TestFunctionClass::Finite { .. }) { 2.0 } else { 1.0 };
                if let Some(k) = functions.iter().position(|f| f.sup_norm() > limit + 1e-12) {
                    return Err(Error::Config(format!("function {k} exceeds the sup-norm bound {limit}")));
                }
                if !self.is_symmetric() {
                    return Err(Error::Config("test function class is not closed under negation".into()));
                }
                Ok(())
            }
            TestFunctionClass::TvBall { bound } => {
                if *bound == 1.0 || *bound == 2.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!("TV-ball bound must be 1 or 2, got {bound}")))
                }
            }
            TestFunctionClass::FactoredSum { .. } => Ok(()),
            TestFunctionClass::ExpFamily { statistics } => {
                if statistics.dim() == 0 {
                    Err(Error::Empty("sufficient statistics"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Whether every enumerated function's negation is also in the class.
    pub fn is_symmetric(&self) -> bool {
        match self.functions() {
            Some(fs) => fs.iter().all(|f| {
                let neg = f.negated();
                fs.iter().any(|g| g.same_values(&neg))
            }),
            None => true,
        }
    }

    /// `ln |F|` used in sample-size formulas. Infinite classes use the size of
    /// an equivalent finite class: `2|M|³H` (Scheffé reduction) for the TV ball
    /// and exponential families, `2^L` sign patterns for factored sums.
    pub fn log_size(&self, models: usize, horizon: usize, actions: usize) -> f64 {
        match self {
            TestFunctionClass::Finite { functions } | TestFunctionClass::Scheffe { functions } => {
                (functions.len().max(1) as f64).ln()
            }
            TestFunctionClass::TvBall { .. } | TestFunctionClass::ExpFamily { .. } => {
                (2.0 * (models as f64).powi(3) * horizon as f64).ln()
            }
            TestFunctionClass::FactoredSum { structure } => {
                (horizon * structure.level_parameters(actions)) as f64 * std::f64::consts::LN_2
            }
        }
    }

    /// `sup_f Σ_cells Σ_z μ(z) f(h, x, a, z)` and, for enumerated classes, the
    /// index of the first maximiser.
    pub fn supremum_with_argmax(&self, h: usize, cells: &[CellMeasure]) -> Result<(f64, Option<usize>)> {
        match self {
            TestFunctionClass::Finite { functions } | TestFunctionClass::Scheffe { functions } => {
                if functions.is_empty() {
                    return Err(Error::Empty("test function class"));
                }
                let mut best = (f64::NEG_INFINITY, 0);
                for (k, f) in functions.iter().enumerate() {
                    let v: f64 = cells.iter().map(|c| f.integrate(h, c.state, c.action, &c.mass)).sum();
                    if v > best.0 {
                        best = (v, k);
                    }
                }
                Ok((best.0, Some(best.1)))
            }
            TestFunctionClass::TvBall { bound } => {
                let v: f64 = cells.iter().map(|c| c.mass.iter().map(|e| e.1.abs()).sum::<f64>()).sum();
                Ok((bound * v, None))
            }
            TestFunctionClass::FactoredSum { structure } => Ok((factored_cells_supremum(structure, cells), None)),
            TestFunctionClass::ExpFamily { statistics } => {
                let m = statistics.dim();
                let mut total = 0.0;
                for c in cells {
                    let mut diff = vec![0.0; m];
                    for &(z, p) in &c.mass {
                        for (d, t) in diff.iter_mut().zip(statistics.eval(h, z)) {
                            *d += p * t;
                        }
                    }
                    total += expfam_supremum(&diff);
                }
                Ok((total, None))
            }
        }
    }

    pub fn supremum(&self, h: usize, cells: &[CellMeasure]) -> Result<f64> {
        Ok(self.supremum_with_argmax(h, cells)?.0)
    }
}

// A factored-sum function is g_1 + … + g_d with g_i a ±1 function of
// (x[pa_i], a, x'[i]). Separability lets each (i, u, a, o) pick its own sign,
// so the supremum is the sum of absolute aggregated masses.
fn factored_cells_supremum(s: &FactoredStructure, cells: &[CellMeasure]) -> f64 {
    let o = s.num_values;
    let mut total = 0.0;
    for i in 0..s.d() {
        let mut agg: std::collections::BTreeMap<(usize, usize), Vec<f64>> = Default::default();
        for c in cells {
            let values = s.decode(c.state);
            let u = s.parent_index(i, &values);
            let row = agg.entry((u, c.action)).or_insert_with(|| vec![0.0; o]);
            for &(z, p) in &c.mass {
                row[s.value_of(z.next, i)] += p;
            }
        }
        total += agg.values().flatten().map(|v| v.abs()).sum::<f64>();
    }
    total
}

// ── Scheffé construction ──

/// Builds `{±f_{π_{M3}, M1, M2, h}}` over every ordered triple of models and
/// every level: roll in `π_{M3}` inside `M1`, take actions from `π_{M2}`, and
/// use the sign of `M2`'s minus `M1`'s joint outcome law. Unreached states
/// get no entries (value 0).
pub fn build_scheffe_class(class: &ModelClass) -> Result<TestFunctionClass> {
    if class.is_empty() {
        return Err(Error::Empty("model class"));
    }
    let ms = class.members();
    let mut functions = Vec::with_capacity(2 * ms.len().pow(3) * class.horizon());
    for (i1, m1) in ms.iter().enumerate() {
        for (i2, m2) in ms.iter().enumerate() {
            for (i3, m3) in ms.iter().enumerate() {
                for h in 0..class.horizon() {
                    let occ = occupancy(&m1.model, m3.policy(), h)?;
                    let mut cells = Vec::new();
                    for (x, &w) in occ.iter().enumerate() {
                        if w == 0.0 {
                            continue;
                        }
                        for a in 0..class.actions() {
                            if m2.policy().prob(h, x, a) == 0.0 {
                                continue;
                            }
                            let diff = combine(&[
                                (1.0, &joint_law(&m2.model, h, x, a)),
                                (-1.0, &joint_law(&m1.model, h, x, a)),
                            ]);
                            cells.push(TableCell {
                                level: h,
                                state: x,
                                action: a,
                                values: diff.into_iter().map(|(z, v)| (z, sign(v))).collect(),
                            });
                        }
                    }
                    let prov = Origin {
                        roll_in: i3,
                        reference: i1,
                        target: i2,
                        level: h,
                        sign: 1,
                    };
                    let f = WitnessFunction::Table(TableFunction::new(cells, Some(prov)));
                    functions.push(f.negated());
                    functions.push(f);
                }
            }
        }
    }
    // Keep the positive copy first in each pair for readability.
    for pair in functions.chunks_mut(2) {
        pair.swap(0, 1);
    }
    Ok(TestFunctionClass::Scheffe { functions })
}

/// Loads an enumerated class from a JSON document
/// `{"type": "finite", "functions": [...]}`.
pub fn load_class(path: impl AsRef<std::path::Path>) -> Result<TestFunctionClass> {
    let class: TestFunctionClass = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    class.check()?;
    Ok(class)
}
