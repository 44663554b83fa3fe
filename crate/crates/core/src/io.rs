//! JSON model files.
//!
//! Tabular schema:
//!
//! ```json
//! {
//!   "horizon": 2, "actions": 2,
//!   "initial": [1.0],
//!   "levels": [
//!     {"states": 1, "transitions": [[[0.5, 0.5], {"next": [1], "probs": [1.0]}]],
//!                   "rewards": [[0.0, {"values": [0.0, 1.0], "probs": [0.5, 0.5]}]]},
//!     {"states": 2, "transitions": [...], "rewards": [...]},
//!     {"states": 1}
//!   ]
//! }
//! ```
//!
//! `transitions[x][a]` and `rewards[x][a]` are given for every decision level;
//! the terminal level lists only its state count. A transition row is either a
//! dense probability array over the next level or a sparse `{next, probs}`
//! object; a reward is either a number (deterministic) or `{values, probs}`.
//! `initial` is dense or sparse in the same way.
//!
//! Factored schema: `{"horizon", "actions", "values", "parents", "cpts",
//! "initial", "reward"}` where `cpts[h][i][u * actions + a]` is the law of
//! variable `i` given parent configuration `u` and action `a`, and `reward` is
//! a tagged object (see [`crate::factored::FactoredReward`]).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cdp::{validate, ModelClass, RewardDist, SparseDist, TabularCdp};
use crate::error::{Error, Result};
use crate::factored::FactoredMdp;

// ── Document types ──

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabularDoc {
    pub horizon: usize,
    pub actions: usize,
    pub initial: DistDoc,
    pub levels: Vec<LevelDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelDoc {
    pub states: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transitions: Vec<Vec<DistDoc>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rewards: Vec<Vec<RewardDoc>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistDoc {
    Dense(Vec<f64>),
    Sparse { next: Vec<usize>, probs: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RewardDoc {
    Value(f64),
    Dist { values: Vec<f64>, probs: Vec<f64> },
}

impl DistDoc {
    fn into_dist(self) -> Result<SparseDist> {
        match self {
            DistDoc::Dense(p) => Ok(SparseDist::from_dense(&p)),
            DistDoc::Sparse { next, probs } => {
                if next.len() != probs.len() {
                    return Err(Error::Structure(format!(
                        "sparse row has {} indices but {} probabilities",
                        next.len(),
                        probs.len()
                    )));
                }
                Ok(SparseDist::new(next.into_iter().zip(probs).collect()))
            }
        }
    }

    fn from_dist(d: &SparseDist, n: usize) -> Self {
        if 2 * d.entries().len() < n {
            DistDoc::Sparse {
                next: d.entries().iter().map(|e| e.0).collect(),
                probs: d.entries().iter().map(|e| e.1).collect(),
            }
        } else {
            DistDoc::Dense(d.to_dense(n))
        }
    }
}

impl RewardDoc {
    fn into_dist(self) -> Result<RewardDist> {
        match self {
            RewardDoc::Value(v) => Ok(RewardDist::deterministic(v)),
            RewardDoc::Dist { values, probs } => RewardDist::new(&values, &probs),
        }
    }

    fn from_dist(r: &RewardDist) -> Self {
        match r.outcomes() {
            [(v, p)] if *p == 1.0 => RewardDoc::Value(*v),
            o => RewardDoc::Dist {
                values: o.iter().map(|e| e.0).collect(),
                probs: o.iter().map(|e| e.1).collect(),
            },
        }
    }
}

impl TabularDoc {
    /// Converts to a model, checking shapes but not numeric invariants.
    pub fn into_unchecked(self) -> Result<TabularCdp> {
        if self.levels.len() != self.horizon + 1 {
            return Err(Error::Structure(format!(
                "horizon {} needs {} levels, found {}",
                self.horizon,
                self.horizon + 1,
                self.levels.len()
            )));
        }
        let level_sizes: Vec<usize> = self.levels.iter().map(|l| l.states).collect();
        let mut transitions = Vec::with_capacity(self.horizon);
        let mut rewards = Vec::with_capacity(self.horizon);
        for level in self.levels.into_iter().take(self.horizon) {
            transitions.push(
                level
                    .transitions
                    .into_iter()
                    .map(|row| row.into_iter().map(DistDoc::into_dist).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?,
            );
            rewards.push(
                level
                    .rewards
                    .into_iter()
                    .map(|row| row.into_iter().map(RewardDoc::into_dist).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        TabularCdp::from_parts_unchecked(self.actions, level_sizes, self.initial.into_dist()?, transitions, rewards)
    }
}

impl TryFrom<TabularDoc> for TabularCdp {
    type Error = Error;
    fn try_from(doc: TabularDoc) -> Result<Self> {
        let m = doc.into_unchecked()?;
        validate(&m)?;
        Ok(m)
    }
}

impl From<TabularCdp> for TabularDoc {
    fn from(m: TabularCdp) -> Self {
        let h_max = m.horizon();
        let levels = (0..=h_max)
            .map(|h| {
                let n = m.states(h);
                if h == h_max {
                    return LevelDoc {
                        states: n,
                        transitions: Vec::new(),
                        rewards: Vec::new(),
                    };
                }
                let next = m.states(h + 1);
                LevelDoc {
                    states: n,
                    transitions: (0..n)
                        .map(|x| (0..m.actions()).map(|a| DistDoc::from_dist(m.transition(h, x, a), next)).collect())
                        .collect(),
                    rewards: (0..n)
                        .map(|x| (0..m.actions()).map(|a| RewardDoc::from_dist(m.reward(h, x, a))).collect())
                        .collect(),
                }
            })
            .collect();
        TabularDoc {
            horizon: h_max,
            actions: m.actions(),
            initial: DistDoc::from_dist(m.initial(), m.states(0)),
            levels,
        }
    }
}

// ── Loading ──

/// A parsed model file of either schema.
#[derive(Debug, Clone)]
pub enum ModelFile {
    Tabular(TabularCdp),
    Factored(FactoredMdp),
}

impl ModelFile {
    pub fn to_tabular(&self) -> Result<TabularCdp> {
        match self {
            ModelFile::Tabular(m) => Ok(m.clone()),
            ModelFile::Factored(f) => crate::factored::expand(f),
        }
    }
}

/// Parses a model document, reporting every invariant violation with its
/// location when the document is well-formed but numerically invalid.
pub fn parse_model(value: serde_json::Value) -> Result<ModelFile> {
    if value.get("levels").is_some() {
        let doc: TabularDoc = serde_json::from_value(value)?;
        let m = doc.into_unchecked()?;
        validate(&m)?;
        Ok(ModelFile::Tabular(m))
    } else if value.get("parents").is_some() {
        Ok(ModelFile::Factored(serde_json::from_value(value)?))
    } else {
        Err(Error::Structure("model document needs either \"levels\" or \"parents\"".into()))
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)?;
    parse_model(serde_json::from_str(&text)?)
}

/// Loads a class from a document `{"models": [...]}` or a bare array.
pub fn load_model_class(path: impl AsRef<Path>) -> Result<ModelClass> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let items = match value {
        serde_json::Value::Array(items) => items,
        serde_json::Value::Object(mut obj) => match obj.remove("models") {
            Some(serde_json::Value::Array(items)) => items,
            _ => return Err(Error::Structure("class document needs a \"models\" array".into())),
        },
        _ => return Err(Error::Structure("class document must be an object or array".into())),
    };
    let files = items.into_iter().map(parse_model).collect::<Result<Vec<_>>>()?;
    if files.iter().all(|f| matches!(f, ModelFile::Factored(_))) && !files.is_empty() {
        let fs = files
            .into_iter()
            .map(|f| match f {
                ModelFile::Factored(f) => f,
                ModelFile::Tabular(_) => unreachable!(),
            })
            .collect();
        return ModelClass::from_factored(fs);
    }
    ModelClass::new(files.iter().map(ModelFile::to_tabular).collect::<Result<Vec<_>>>()?)
}

pub fn save_model(path: impl AsRef<Path>, model: &TabularCdp) -> Result<()> {
    let text = serde_json::to_string_pretty(model)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ViolationKind;

    #[test]
    fn dense_and_sparse_rows_parse() {
        let json = serde_json::json!({
            "horizon": 1, "actions": 2, "initial": [1.0],
            "levels": [
                {"states": 1,
                 "transitions": [[[0.5, 0.5], {"next": [1], "probs": [1.0]}]],
                 "rewards": [[0.0, {"values": [0.0, 1.0], "probs": [0.25, 0.75]}]]},
                {"states": 2}
            ]
        });
        let ModelFile::Tabular(m) = parse_model(json).unwrap() else {
            panic!()
        };
        assert_eq!(m.transition(0, 0, 1).prob(1), 1.0);
        assert_eq!(m.reward(0, 0, 1).mean(), 0.75);
        let back: TabularCdp = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn unnormalised_row_is_located() {
        let json = serde_json::json!({
            "horizon": 1, "actions": 2, "initial": [1.0],
            "levels": [
                {"states": 1, "transitions": [[[0.5, 0.5], [0.6, 0.3]]], "rewards": [[0.0, 0.0]]},
                {"states": 2}
            ]
        });
        let Err(Error::InvalidModel(v)) = parse_model(json) else {
            panic!("expected a located violation")
        };
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].kind, v[0].level, v[0].state, v[0].action), (ViolationKind::NotNormalized, Some(0), Some(0), Some(1)));
    }
}
