//! Run configuration files.
//!
//! A run config is one flat JSON object holding every [`TrainConfig`] field
//! plus the run-level keys of [`RunOptions`]. Missing keys take defaults;
//! unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{LabError, Result};
use crate::evaluation::Decoding;
use crate::trainer::TrainConfig;

/// Output and telemetry settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    /// Output directory; the CLI `--out` flag takes precedence.
    pub out_dir: Option<String>,
    /// Steps between shaped-advantage and rollout dumps; 0 disables them.
    pub dump_interval: usize,
    /// Steps between intermediate checkpoints; 0 writes only the final one.
    pub checkpoint_interval: usize,
    /// Samples per task for the post-training evaluation; 0 skips it.
    pub eval_n: usize,
    pub eval_decoding: Decoding,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out_dir: None,
            dump_interval: 50,
            checkpoint_interval: 0,
            eval_n: 32,
            eval_decoding: Decoding::default(),
        }
    }
}

const RUN_KEYS: [&str; 5] = ["out_dir", "dump_interval", "checkpoint_interval", "eval_n", "eval_decoding"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfigFile {
    pub train: TrainConfig,
    pub run: RunOptions,
}

impl RunConfigFile {
    /// The resolved config as one flat JSON object.
    pub fn to_json(&self) -> String {
        let mut obj = match serde_json::to_value(&self.train).expect("config serialises") {
            Value::Object(m) => m,
            _ => unreachable!("struct serialises to an object"),
        };
        if let Value::Object(run) = serde_json::to_value(&self.run).expect("options serialise") {
            obj.extend(run);
        }
        serde_json::to_string_pretty(&Value::Object(obj)).expect("value serialises")
    }
}

fn typed<T: for<'de> Deserialize<'de>>(obj: Map<String, Value>) -> Result<T> {
    serde_path_to_error::deserialize(Value::Object(obj)).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        if path == "." || path.is_empty() {
            LabError::Config(inner)
        } else {
            LabError::Config(format!("{path}: {inner}"))
        }
    })
}

pub fn parse_config_str(text: &str) -> Result<RunConfigFile> {
    let value: Value = serde_json::from_str(text).map_err(|e| LabError::Config(format!("invalid JSON: {e}")))?;
    let Value::Object(mut obj) = value else {
        return Err(LabError::Config("config must be a JSON object".into()));
    };
    let mut run = Map::new();
    for key in RUN_KEYS {
        if let Some(v) = obj.remove(key) {
            run.insert(key.to_string(), v);
        }
    }
    let train: TrainConfig = typed(obj)?;
    let run: RunOptions = typed(run)?;
    train.validate()?;
    Ok(RunConfigFile { train, run })
}

pub fn parse_config(path: &Path) -> Result<RunConfigFile> {
    parse_config_str(&super::read_text(path)?)
}
