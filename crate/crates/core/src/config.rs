//! Experiment configuration: one TOML document with a section per module.
//!
//! Every field has a default, so an empty file is a valid config. Single
//! leaves can be overridden with dotted paths such as `drpo.group_size=8`.
//! [`ExperimentConfig::validate`] checks every section before any work
//! starts.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::drpo::DrpoConfig;
use crate::error::{Error, Result};
use crate::fusion::ActionSpace;
use crate::policy::{ActionMode, PolicyShape};
use crate::reward::RewardConfig;
use crate::satisfaction::{RewardModelHyper, SatConfig};
use crate::simenv::EnvConfig;

/// Discretization of the fusion weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActionConfig {
    /// Bins per task `B`, evenly spaced over `[min_weight, max_weight]`.
    pub bins: usize,
    pub min_weight: f64,
    pub max_weight: f64,
    /// Restrict sampling to the feasible set instead of penalizing
    /// infeasible sums. With independent per-task heads and the penalty
    /// alone, moving between feasible actions needs several heads to change
    /// at once, so training tends to freeze on the first feasible action.
    pub masked: bool,
}

impl Default for ActionConfig {
    fn default() -> Self {
        Self {
            bins: 5,
            min_weight: 0.0,
            max_weight: 1.0,
            masked: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub hidden: usize,
    pub layers: usize,
    pub relation_dim: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            layers: 2,
            relation_dim: 8,
        }
    }
}

/// Logging policy for `gen-data`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Logged episodes per training query, each under an independently drawn
    /// feasible action.
    pub passes: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { passes: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Write a policy checkpoint every this many iterations; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { checkpoint_every: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// α grid used when sweeping `alpha`.
    pub alphas: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alphas: (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub env: EnvConfig,
    pub action: ActionConfig,
    pub satisfaction: SatConfig,
    pub reward_model: RewardModelHyper,
    pub reward: RewardConfig,
    pub policy: PolicyConfig,
    pub drpo: DrpoConfig,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub sweep: SweepConfig,
}

/// Parses `value` as a TOML literal, falling back to a bare string.
fn parse_leaf(value: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

/// Sets the leaf at `path` (dot separated), creating tables on the way.
pub fn set_path(root: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("malformed override path `{path}`")));
    }
    let (leaf, parents) = keys.split_last().expect("split yields at least one key");
    let mut table = root;
    for key in parents {
        let entry = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{key}` in `{path}` is not a table")))?;
    }
    table.insert(leaf.to_string(), value);
    Ok(())
}

/// Splits `path=value`.
pub fn parse_override(item: &str) -> Result<(String, toml::Value)> {
    let (path, value) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{item}` is not of the form path=value")))?;
    Ok((path.trim().to_string(), parse_leaf(value.trim())))
}

impl ExperimentConfig {
    /// Parses TOML text, applies `overrides` in order, and validates.
    pub fn from_toml_with(text: &str, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (path, value) in overrides {
            set_path(&mut table, path, value.clone())?;
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_with(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// SHA-256 of the canonical JSON form of the resolved config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes to JSON");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.satisfaction.validate()?;
        self.reward_model.validate()?;
        self.reward.validate()?;
        self.drpo.validate()?;
        if self.action.bins < 2 {
            return Err(Error::invalid("action.bins", self.action.bins, ">= 2"));
        }
        if !(self.action.min_weight >= 0.0 && self.action.max_weight > self.action.min_weight) {
            return Err(Error::invalid(
                "action.min_weight/max_weight",
                format!("{}/{}", self.action.min_weight, self.action.max_weight),
                "0 <= min < max",
            ));
        }
        if self.reward.ndcg_cutoff != self.env.utility_top_k {
            return Err(Error::invalid(
                "env.utility_top_k",
                self.env.utility_top_k,
                format!("equal to reward.ndcg_cutoff ({})", self.reward.ndcg_cutoff),
            ));
        }
        if self.data.passes == 0 {
            return Err(Error::invalid("data.passes", self.data.passes, ">= 1"));
        }
        if self.sweep.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::invalid("sweep.alphas", format!("{:?}", self.sweep.alphas), "all in [0, 1]"));
        }
        self.policy_shape(true).validate()?;
        let space = self.action_space()?;
        if crate::fusion::enumerate_feasible(&space)?.is_empty() {
            return Err(Error::Config(format!(
                "no weight vector on the {}-bin grid sums to 1 within reward.xi = {}",
                self.action.bins, self.reward.xi
            )));
        }
        Ok(())
    }

    pub fn action_space(&self) -> Result<ActionSpace> {
        ActionSpace::uniform_grid(
            self.env.tasks,
            self.action.min_weight,
            self.action.max_weight,
            self.action.bins,
            self.reward.xi,
        )
    }

    pub fn action_mode(&self) -> Result<ActionMode> {
        if self.action.masked {
            ActionMode::masked(&self.action_space()?)
        } else {
            Ok(ActionMode::Factorized)
        }
    }

    pub fn policy_shape(&self, relation: bool) -> PolicyShape {
        PolicyShape {
            input_dim: self.env.state_dim(),
            hidden: self.policy.hidden,
            layers: self.policy.layers,
            tasks: self.env.tasks,
            bins: self.action.bins,
            relation_dim: self.policy.relation_dim,
            relation,
        }
    }
}
