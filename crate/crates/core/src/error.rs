//! Error types shared across the crate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elimination::RunRecord;

pub type Result<T> = std::result::Result<T, Error>;

/// A single violated model invariant, with the location it was found at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NotNormalized,
    NegativeProbability,
    IndexOutOfRange,
    RewardOutOfRange,
    CumulativeReward,
    BadParents,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.kind)?;
        if let Some(h) = self.level {
            write!(f, " at h={h}")?;
        }
        if let Some(x) = self.state {
            write!(f, " x={x}")?;
        }
        if let Some(a) = self.action {
            write!(f, " a={a}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("structural mismatch: {0}")]
    Structure(String),

    #[error("level {level} out of range for horizon {horizon}")]
    LevelOutOfRange { level: usize, horizon: usize },

    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Violation>),

    #[error("expansion needs {states} states per level, cap is {cap}")]
    Capacity { states: u128, cap: u128 },

    #[error("class of {size} models exceeds the cap of {cap}")]
    ClassTooLarge { size: usize, cap: usize },

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("internal consistency violated: {0}")]
    Inconsistent(String),

    #[error("round {round}: no level has estimated Bellman error >= {threshold}")]
    NoWitnessLevel { round: usize, threshold: f64 },

    #[error("version space became empty in round {}", .record.rounds.len())]
    EmptyVersionSpace { record: Box<RunRecord> },

    #[error("trajectory budget {budget} exhausted after {used} trajectories")]
    Budget { budget: u64, used: u64, record: Box<RunRecord> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag used in error JSON documents.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Structure(_) => "structure",
            Error::LevelOutOfRange { .. } => "level_out_of_range",
            Error::InvalidModel(_) => "invalid_model",
            Error::Capacity { .. } => "capacity",
            Error::ClassTooLarge { .. } => "class_too_large",
            Error::SupportMismatch(_) => "support_mismatch",
            Error::Empty(_) => "empty",
            Error::Inconsistent(_) => "inconsistent",
            Error::NoWitnessLevel { .. } => "no_witness_level",
            Error::EmptyVersionSpace { .. } => "empty_version_space",
            Error::Budget { .. } => "budget",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
