//! JSON configuration files and `--set key=value` overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anonymix::data::SynthConfig;
use anonymix::forest::ForestConfig;
use anonymix::metrics::{EvaluationOptions, UtilityWeights};
use anonymix::relevance::{SelectionConfig, DEFAULT_MI_BINS};
use anonymix::transform::AnonymizationParams;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic {
        #[serde(default)]
        synth: SynthConfig,
    },
    Csv {
        path: PathBuf,
        schema: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevanceSource {
    /// Gini importances of the recognition models.
    #[default]
    Model,
    /// Binned mutual information on the training split.
    MutualInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelevanceConfig {
    pub method: RelevanceSource,
    pub mi_bins: usize,
}

impl Default for RelevanceConfig {
    fn default() -> Self {
        RelevanceConfig {
            method: RelevanceSource::Model,
            mi_bins: DEFAULT_MI_BINS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    /// Anonymized dataset CSV.
    pub dataset: Option<PathBuf>,
    /// Run metadata JSON written next to the anonymized data.
    pub sidecar: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub topk_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub params: AnonymizationParams,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub relevance: RelevanceConfig,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub weights: UtilityWeights,
    #[serde(default)]
    pub evaluation: EvaluationOptions,
    /// Pre-trained models by attribute; missing ones are trained.
    #[serde(default)]
    pub models: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "split.train_fraction must lie in (0, 1), got {}",
                self.split.train_fraction
            )));
        }
        if self.relevance.mi_bins < 2 {
            return Err(CliError::Config("relevance.mi_bins must be at least 2".into()));
        }
        if let DataSource::Synthetic { synth } = &self.data {
            synth.validate()?;
        }
        self.selection.validate()?;
        self.weights.validate()?;
        Ok(())
    }

    /// Hex SHA-256 of everything that determines the results; output
    /// paths are left out.
    pub fn digest(&self) -> String {
        let mut cfg = self.clone();
        cfg.outputs = Outputs::default();
        digest_json(&cfg)
    }
}

pub fn digest_json<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Parse a value given on the command line: JSON if it parses, otherwise
/// a plain string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Apply one `a.b.c=value` override to a JSON document.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{spec}` is not key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{path}`")));
    }
    let mut at = doc;
    for (i, key) in keys.iter().enumerate() {
        let obj = at.as_object_mut().ok_or_else(|| {
            CliError::Config(format!(
                "override `{path}`: `{}` is not an object",
                keys[..i].join(".")
            ))
        })?;
        if i == keys.len() - 1 {
            obj.insert(key.to_string(), parse_value(raw));
            return Ok(());
        }
        at = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("keys is never empty")
}

pub fn read_json_value(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::ConfigFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::ConfigFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn from_value<T: DeserializeOwned>(doc: Value) -> Result<T> {
    serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))
}

/// Load a JSON config file and apply overrides in order.
pub fn load<T: DeserializeOwned>(path: &Path, overrides: &[String]) -> Result<T> {
    let mut doc = read_json_value(path)?;
    for spec in overrides {
        apply_override(&mut doc, spec)?;
    }
    from_value(doc)
}

/// One list of values per sweepable parameter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Axes {
    /// Purity.
    pub t: Vec<f64>,
    /// Set size.
    pub g: Vec<usize>,
    /// Target weight.
    pub w: Vec<f64>,
    /// Retention ratio for the attribute of interest.
    pub r_p: Vec<f64>,
    /// Retention ratio applied to every additional attribute.
    pub r_q: Vec<f64>,
    /// Rejection ratio for the sensitive attribute.
    pub r_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub base: RunConfig,
    #[serde(default)]
    pub axes: Axes,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default = "default_cap")]
    pub max_cells: usize,
    /// Concurrent cells; `ANON_WORKERS` or all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    pub output: PathBuf,
    /// Per-cell result cache; defaults to `<output>.cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn default_cap() -> usize {
    10_000
}
