//! Run configuration: one flat JSON object holding every physical
//! parameter, operating condition and pipeline setting.
//!
//! Missing keys take their defaults. `p_H2O`, when absent, is the water
//! saturation pressure at `T`. Unknown keys and values of the wrong type are
//! rejected with the key named in the error.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::constants::{saturation_pressure, OperatingConditions, PhysicsParameters, RootSelection};
use crate::dataset::sha256_hex;
use crate::error::{Error, Result};
use crate::simulator::{DEFAULT_STEPS, MIN_STEPS};
use crate::training::TrainingConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSettings {
    /// RK4 steps over `[0, t_max]`.
    pub n_steps: usize,
    /// Seed of the observation noise.
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub train_fraction: f64,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            n_steps: DEFAULT_STEPS,
            seed: 42,
            n_train: 100,
            n_test: 1000,
            train_fraction: 1.0 / 3.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub physics: PhysicsParameters,
    #[serde(flatten)]
    pub conditions: OperatingConditions,
    #[serde(flatten)]
    pub pipeline: PipelineSettings,
    #[serde(flatten)]
    pub training: TrainingConfig,
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.is_u64() => "non-negative integer",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn compatible(default: &Value, given: &Value) -> bool {
    match (default, given) {
        (Value::Number(d), Value::Number(g)) => !d.is_u64() || g.is_u64(),
        (Value::Bool(_), Value::Bool(_)) | (Value::String(_), Value::String(_)) => true,
        _ => false,
    }
}

impl RunConfig {
    fn as_map(&self) -> BTreeMap<String, Value> {
        match serde_json::to_value(self).expect("config serializes") {
            Value::Object(m) => m.into_iter().collect(),
            _ => unreachable!("config serializes to an object"),
        }
    }

    /// Parses and validates a configuration document.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let given: Value =
            serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        let Value::Object(given) = given else {
            return Err(Error::config("<document>", "expected a JSON object"));
        };
        let mut merged = RunConfig::default().as_map();
        for (key, value) in &given {
            let Some(default) = merged.get(key) else {
                return Err(Error::config(key.as_str(), "unknown key"));
            };
            if !compatible(default, value) {
                return Err(Error::config(
                    key.as_str(),
                    format!("expected a {}, got a {}", kind(default), kind(value)),
                ));
            }
            if key == "peroxide_root" {
                serde_json::from_value::<RootSelection>(value.clone())
                    .map_err(|e| Error::config(key.as_str(), e.to_string()))?;
            }
            merged.insert(key.clone(), value.clone());
        }
        let mut config: RunConfig = serde_json::from_value(Value::Object(merged.into_iter().collect()))
            .map_err(|e| Error::config("<document>", e.to_string()))?;
        if !given.contains_key("p_H2O") {
            config.conditions.p_h2o = saturation_pressure(config.conditions.temperature);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.physics.validate()?;
        self.conditions.validate()?;
        self.training.validate()?;
        let p = &self.pipeline;
        if p.n_steps < MIN_STEPS {
            return Err(Error::config("n_steps", format!("must be at least {MIN_STEPS}")));
        }
        if p.n_train < 2 {
            return Err(Error::config("n_train", "must be at least 2"));
        }
        if p.n_test < 2 {
            return Err(Error::config("n_test", "must be at least 2"));
        }
        if !(p.train_fraction > 0.0 && p.train_fraction <= 1.0) {
            return Err(Error::config("train_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Sets both the noise seed and the initialization seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.pipeline.seed = seed;
        self.training.init_seed = seed;
        self
    }

    /// Compact JSON with sorted keys.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.as_map()).expect("config serializes")
    }

    pub fn pretty_json(&self) -> String {
        serde_json::to_string_pretty(&self.as_map()).expect("config serializes") + "\n"
    }

    /// SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(err: Error) -> String {
        match err {
            Error::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(RunConfig::from_json_str("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn committed_default_matches_code() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.json");
        assert_eq!(RunConfig::load(&path).unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trips_through_pretty_json() {
        let mut c = RunConfig::default();
        c.physics.k5_true = 1234.5;
        c.training.physics_enabled = false;
        let back = RunConfig::from_json_str(&c.pretty_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_key_is_named() {
        assert_eq!(key_of(RunConfig::from_json_str(r#"{"k6": 1.0}"#).unwrap_err()), "k6");
    }

    #[test]
    fn wrong_type_is_named() {
        let err = RunConfig::from_json_str(r#"{"n_train": 10.5}"#).unwrap_err();
        assert_eq!(key_of(err), "n_train");
        let err = RunConfig::from_json_str(r#"{"physics_enabled": 1}"#).unwrap_err();
        assert_eq!(key_of(err), "physics_enabled");
        let err = RunConfig::from_json_str(r#"{"T": "hot"}"#).unwrap_err();
        assert_eq!(key_of(err), "T");
    }

    #[test]
    fn invalid_values_are_named() {
        for (doc, key) in [
            (r#"{"lambda_V": -1}"#, "lambda_V"),
            (r#"{"k2": 0}"#, "k2"),
            (r#"{"t_mem0": -0.01}"#, "t_mem0"),
            (r#"{"n_steps": 3}"#, "n_steps"),
            (r#"{"train_fraction": 1.5}"#, "train_fraction"),
            (r#"{"k5_true": 1e6}"#, "k5_true"),
        ] {
            assert_eq!(key_of(RunConfig::from_json_str(doc).unwrap_err()), key, "{doc}");
        }
    }

    #[test]
    fn water_pressure_follows_temperature_unless_given() {
        let c = RunConfig::from_json_str(r#"{"T": 333.15}"#).unwrap();
        assert_eq!(c.conditions.p_h2o, saturation_pressure(333.15));
        let c = RunConfig::from_json_str(r#"{"T": 333.15, "p_H2O": 0.5}"#).unwrap();
        assert_eq!(c.conditions.p_h2o, 0.5);
    }

    #[test]
    fn hash_changes_with_content() {
        let a = RunConfig::default();
        let b = a.clone().with_seed(7);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn root_selection_parses() {
        let c = RunConfig::from_json_str(r#"{"peroxide_root": "largest_positive"}"#).unwrap();
        assert_eq!(c.physics.peroxide_root, crate::constants::RootSelection::LargestPositive);
        let err = RunConfig::from_json_str(r#"{"peroxide_root": "middle"}"#).unwrap_err();
        assert_eq!(key_of(err), "peroxide_root");
    }
}
