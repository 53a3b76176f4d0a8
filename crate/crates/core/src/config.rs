//! JSON experiment files with `--set key=value` overrides.
//!
//! A file has a required `model` section and optional `sim` and `mc`
//! sections. Overrides address fields by dotted path (`model.a.beta=0.6`,
//! `mc.n_grid=[512,1024,2048]`); values are parsed as JSON and fall back to
//! plain strings. They are applied to the parsed document before it is
//! checked, so unknown keys introduced by an override are rejected too.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::montecarlo::McConfig;
use crate::simulate::SimConfig;

/// Replication settings of an experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default)]
    pub name: Option<String>,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub mc: Option<McSection>,
}

/// Sets `value` at a dotted `path` inside `doc`, creating objects as needed.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(Error::Config(format!("override `{assignment}` has an empty key")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut node = doc;
    for key in path.split('.') {
        node = match node {
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::Config(format!("`{key}` in `{path}` must index an array")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range ({len} entries) in `{path}`")))?
            }
            other => {
                if !other.is_object() {
                    *other = Value::Object(Default::default());
                }
                other
                    .as_object_mut()
                    .expect("just made an object")
                    .entry(key)
                    .or_insert(Value::Null)
            }
        };
    }
    *node = value;
    Ok(())
}

impl ExperimentConfig {
    /// Parses `text`, applies `overrides` in order, and validates the model.
    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let config: ExperimentConfig = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        config.model.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text, overrides)
    }

    /// Simulation settings, with an optional seed override.
    pub fn sim_config(&self, seed: Option<u64>) -> Result<SimConfig> {
        let mut sim = self
            .sim
            .clone()
            .ok_or_else(|| Error::invalid("sim", "section is required for this command"))?;
        if let Some(s) = seed {
            sim.seed = s;
        }
        sim.resolve(&self.model)?;
        Ok(sim)
    }

    /// Monte Carlo settings; `--workers` and `--seed` take precedence.
    pub fn mc_config(&self, workers: Option<usize>, seed: Option<u64>) -> Result<McConfig> {
        let mc = self
            .mc
            .as_ref()
            .ok_or_else(|| Error::invalid("mc", "section is required for this command"))?;
        let mut sim = self.sim.clone().unwrap_or_else(|| SimConfig::new(0, 0));
        sim.seed = 0;
        let config = McConfig {
            name: mc.name.clone().unwrap_or_else(|| "experiment".into()),
            spec: self.model.clone(),
            n_grid: mc.n_grid.clone(),
            replications: mc.replications,
            master_seed: seed.unwrap_or(mc.master_seed),
            workers: workers.or(mc.workers).unwrap_or(1),
            sim,
        };
        config.validate()?;
        Ok(config)
    }
}
