use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ObjectiveId;
use crate::error::{Error, Result};

/// How per-mask morphology scores are combined into one set-level value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    #[default]
    Mean,
    Median,
}

/// Active objectives and the constants of the reward functions.
///
/// Serialized as a flat `key = value` document:
///
/// ```toml
/// objectives = ["small_sensitivity", "large_coverage"]
/// tau_low = 0.1
/// tau_high = 0.6
/// tau_dup = 0.9
/// gamma = 3.0
/// alpha = 1.0
/// beta = 1.0
/// epsilon = 1e-9
/// aggregate = "mean"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSpec {
    pub objectives: Vec<ObjectiveId>,
    pub tau_low: f64,
    pub tau_high: f64,
    pub tau_dup: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// px^2
    pub epsilon: f64,
    pub aggregate: Aggregator,
}

impl Default for RewardSpec {
    fn default() -> Self {
        RewardSpec {
            objectives: vec![ObjectiveId::OverlapFidelity],
            tau_low: 0.10,
            tau_high: 0.60,
            tau_dup: 0.90,
            gamma: 3.0,
            alpha: 1.0,
            beta: 1.0,
            epsilon: 1e-9,
            aggregate: Aggregator::Mean,
        }
    }
}

impl RewardSpec {
    pub fn with_objectives(objectives: impl IntoIterator<Item = ObjectiveId>) -> Self {
        RewardSpec {
            objectives: objectives.into_iter().collect(),
            ..Default::default()
        }
    }

    /// Checks the constraints and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        unit("tau_low", self.tau_low)?;
        unit("tau_high", self.tau_high)?;
        unit("tau_dup", self.tau_dup)?;
        if self.tau_low > self.tau_high {
            return Err(Error::Config(format!(
                "tau_low {} exceeds tau_high {}",
                self.tau_low, self.tau_high
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            return Err(Error::Config("alpha and beta must be non-negative".into()));
        }
        if self.objectives.is_empty() {
            return Err(Error::Config("at least one objective must be active".into()));
        }
        for (i, o) in self.objectives.iter().enumerate() {
            if self.objectives[..i].contains(o) {
                return Err(Error::Config(format!("objective {o} listed twice")));
            }
        }
        let mut warnings = Vec::new();
        if self.tau_dup <= self.tau_high {
            warnings.push(format!(
                "tau_dup {} does not exceed tau_high {}: overlap and duplicate bands intersect",
                self.tau_dup, self.tau_high
            ));
        }
        Ok(warnings)
    }

    /// Parses a reward document: either the flat keys, or a document with a
    /// `[reward]` table (as in a campaign config).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let table = match value.get("reward") {
            Some(toml::Value::Table(t)) => t.clone(),
            _ => value,
        };
        let spec: RewardSpec = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("reward spec: {e}")))?;
        for w in spec.validate()? {
            log::warn!("{w}");
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("reward spec serializes")
    }
}
