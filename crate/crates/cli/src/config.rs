//! Run configuration: built-in defaults, then a profile name or TOML file,
//! then command-line flags.
//!
//! ```toml
//! profile = "desk"        # optional base model profile
//!
//! [model]                 # any ModelConfig field
//! n_queries = 12
//!
//! [costs]                 # CostWeights
//! [loss]                  # LossWeights
//! [train]                 # TrainSettings
//! [eval]                  # EvalConfig
//! [synth]                 # SynthConfig
//! ```

use std::path::Path;

use hoiset_core::assignment::CostWeights;
use hoiset_core::eval::EvalConfig;
use hoiset_core::io::synth::SynthConfig;
use hoiset_core::losses::LossWeights;
use hoiset_core::model::{ModelConfig, TrainSettings};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub costs: CostWeights,
    pub loss: LossWeights,
    pub train: TrainSettings,
    pub eval: EvalConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::paper(),
            costs: CostWeights::default(),
            loss: LossWeights::default(),
            train: TrainSettings::default(),
            eval: EvalConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

fn profile(name: &str) -> Result<ModelConfig, Failure> {
    ModelConfig::profile(name)
        .ok_or_else(|| Failure::Validation(format!("unknown profile {name:?} (paper, desk, tiny)")))
}

/// Overlay the fields present in `patch` onto `base`.
fn overlay<T: Clone + Serialize + DeserializeOwned>(
    base: &T,
    patch: Option<&Value>,
    section: &str,
) -> Result<T, Failure> {
    let Some(patch) = patch else {
        return Ok(base.clone());
    };
    let mut v = serde_json::to_value(base)?;
    let (Value::Object(dst), Value::Object(src)) = (&mut v, patch) else {
        return Err(Failure::Validation(format!("[{section}] must be a table")));
    };
    for (k, val) in src {
        if !dst.contains_key(k) {
            return Err(Failure::Validation(format!("unknown key {k:?} in [{section}]")));
        }
        dst.insert(k.clone(), val.clone());
    }
    serde_json::from_value(v).map_err(|e| Failure::Validation(format!("[{section}]: {e}")))
}

/// `source` is a profile name or a path to a TOML file.
pub fn load(source: Option<&str>) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    let Some(source) = source else {
        return Ok(cfg);
    };
    if ModelConfig::profile(source).is_some() && !Path::new(source).exists() {
        cfg.model = profile(source)?;
        return Ok(cfg);
    }
    let text = std::fs::read_to_string(source).map_err(|e| Failure::Validation(format!("config {source}: {e}")))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| Failure::Validation(format!("config {source}: {e}")))?;
    let doc = serde_json::to_value(&table)?;
    for key in doc.as_object().into_iter().flat_map(|m| m.keys()) {
        if !["profile", "model", "costs", "loss", "train", "eval", "synth"].contains(&key.as_str()) {
            return Err(Failure::Validation(format!("unknown section {key:?} in {source}")));
        }
    }
    if let Some(name) = doc.get("profile") {
        let name = name
            .as_str()
            .ok_or_else(|| Failure::Validation("profile must be a string".into()))?;
        cfg.model = profile(name)?;
    }
    Ok(RunConfig {
        model: overlay(&cfg.model, doc.get("model"), "model")?,
        costs: overlay(&cfg.costs, doc.get("costs"), "costs")?,
        loss: overlay(&cfg.loss, doc.get("loss"), "loss")?,
        train: overlay(&cfg.train, doc.get("train"), "train")?,
        eval: overlay(&cfg.eval, doc.get("eval"), "eval")?,
        synth: overlay(&cfg.synth, doc.get("synth"), "synth")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_profiles_and_files() {
        assert_eq!(load(None).unwrap().model, ModelConfig::paper());
        assert_eq!(load(Some("tiny")).unwrap().model, ModelConfig::tiny());
        assert!(load(Some("huge")).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "profile = \"desk\"\n[model]\nn_queries = 12\n[eval]\ntop_k = 5\n",
        )
        .unwrap();
        let cfg = load(Some(path.to_str().unwrap())).unwrap();
        assert_eq!(cfg.model.n_queries, 12);
        assert_eq!(cfg.model.d_model, ModelConfig::desk().d_model);
        assert_eq!(cfg.eval.top_k, 5);
        assert_eq!(cfg.costs, CostWeights::default());

        std::fs::write(&path, "[model]\nbogus = 1\n").unwrap();
        assert!(load(Some(path.to_str().unwrap())).is_err());
    }
}
