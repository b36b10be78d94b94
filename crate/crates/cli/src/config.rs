//! Flat JSON experiment configs.
//!
//! Every key is optional; absent keys take the library defaults. Unknown
//! keys are rejected with the nearest known key as a suggestion.

use std::fs;
use std::path::{Path, PathBuf};

use ictlab_core::data::Sampler;
use ictlab_core::mixup::{ConsistencySpace, DistanceKind};
use ictlab_core::raster::DEFAULT_RESOLUTION;
use ictlab_core::trainer::{DatasetKind, LambdaSharing};
use ictlab_core::{Method, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Accepted keys, in documentation order.
pub const KEYS: &[&str] = &[
    "method",
    "k",
    "alpha",
    "w_max",
    "ramp_fraction",
    "total_steps",
    "batch_size",
    "lr",
    "beta1",
    "beta2",
    "adam_epsilon",
    "seed",
    "seeds",
    "probe_cadence",
    "probe_pairs",
    "log_every",
    "hidden",
    "dataset",
    "n_points",
    "noise_sd",
    "blob_centers",
    "n_labeled",
    "n_test",
    "sampler",
    "data_seed",
    "distance",
    "consistency_space",
    "stop_gradient",
    "lambda_sharing",
    "sweep_labels",
    "sweep_methods",
    "resolution",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: malformed JSON: {message}")]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}:{line}: unknown key {key:?}{}", suggestion.as_ref().map(|s| format!(" (did you mean {s:?}?)")).unwrap_or_default())]
    UnknownKey {
        path: PathBuf,
        line: usize,
        key: String,
        suggestion: Option<String>,
    },
    #[error("{path}:{line}: invalid value for {key:?}: {message}")]
    Invalid {
        path: PathBuf,
        line: usize,
        key: String,
        message: String,
    },
}

/// A training config plus the settings that only the front end uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub sweep_labels: Vec<usize>,
    pub sweep_methods: Vec<(Method, usize)>,
    pub resolution: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            seeds: (0..5).collect(),
            sweep_labels: vec![2, 3, 10, 50, 200],
            sweep_methods: vec![
                (Method::Erm, 1),
                (Method::Ict, 2),
                (Method::Ict, 3),
                (Method::Ict, 4),
            ],
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

/// Parses a method name with an optional K suffix: `erm`, `ict`, `ict_k`,
/// `ict3`, `mixup_2`.
pub fn parse_method(s: &str) -> Result<(Method, Option<usize>), String> {
    let lower = s.to_ascii_lowercase();
    let split = lower
        .find(|c: char| c.is_ascii_digit())
        .unwrap_or(lower.len());
    let (name, digits) = lower.split_at(split);
    let name = name.strip_suffix('_').unwrap_or(name);
    let method: Method = name
        .parse()
        .map_err(|e: ictlab_core::Error| e.to_string())?;
    if digits.is_empty() {
        return Ok((method, None));
    }
    let k = digits
        .parse()
        .map_err(|_| format!("bad K suffix in {s:?}"))?;
    if !method.uses_k() {
        return Err(format!("{method} takes no K suffix"));
    }
    Ok((method, Some(k)))
}

/// Edit-distance-nearest key, if it is close enough to be a plausible typo.
pub fn suggest_key(key: &str) -> Option<&'static str> {
    KEYS.iter()
        .map(|k| (strsim::damerau_levenshtein(key, k), *k))
        .filter(|(d, k)| *d <= 2.max(k.len() / 3))
        .min_by_key(|(d, _)| *d)
        .map(|(_, k)| k)
}

/// 1-based line on which `"key"` first appears as an object key.
fn key_line(text: &str, key: &str) -> usize {
    let quoted = format!("\"{key}\"");
    text.lines()
        .position(|l| {
            l.find(&quoted)
                .is_some_and(|i| l[i + quoted.len()..].trim_start().starts_with(':'))
        })
        .map_or(1, |i| i + 1)
}

struct Parser<'a> {
    path: &'a Path,
    text: &'a str,
}

impl Parser<'_> {
    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            path: self.path.to_path_buf(),
            line: key_line(self.text, key),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn get<T: DeserializeOwned>(&self, key: &str, value: &Value) -> Result<T, ConfigError> {
        serde_json::from_value(value.clone()).map_err(|e| self.invalid(key, e.to_string()))
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, path)
}

/// Parses config text; `path` is only used in error messages.
pub fn parse_config_str(text: &str, path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let p = Parser { path, text };
    let value: Value = if text.trim().is_empty() {
        Value::Object(Map::new())
    } else {
        serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?
    };
    let Value::Object(map) = value else {
        return Err(ConfigError::Syntax {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            message: "the config must be a JSON object".into(),
        });
    };

    let mut cfg = ExperimentConfig::default();
    let mut method_k = None;
    let t = &mut cfg.train;
    for (key, v) in &map {
        match key.as_str() {
            "method" => {
                let s: String = p.get(key, v)?;
                let (m, k) = parse_method(&s).map_err(|e| p.invalid(key, e))?;
                t.method = m;
                method_k = k;
            }
            "k" => t.k = p.get(key, v)?,
            "alpha" => t.alpha = p.get(key, v)?,
            "w_max" => t.w_max = p.get(key, v)?,
            "ramp_fraction" => t.ramp_fraction = p.get(key, v)?,
            "total_steps" => t.total_steps = p.get(key, v)?,
            "batch_size" => t.batch_size = p.get(key, v)?,
            "lr" => t.adam.lr = p.get(key, v)?,
            "beta1" => t.adam.beta1 = p.get(key, v)?,
            "beta2" => t.adam.beta2 = p.get(key, v)?,
            "adam_epsilon" => t.adam.epsilon = p.get(key, v)?,
            "seed" => {
                if map.contains_key("seeds") {
                    return Err(p.invalid(key, "give either seed or seeds, not both"));
                }
                cfg.seeds = vec![p.get(key, v)?];
            }
            "seeds" => cfg.seeds = p.get(key, v)?,
            "probe_cadence" => t.probe_cadence = p.get(key, v)?,
            "probe_pairs" => t.probe_pairs = p.get(key, v)?,
            "log_every" => t.log_every = p.get(key, v)?,
            "hidden" => t.hidden = p.get(key, v)?,
            "dataset" => t.dataset.kind = p.get::<DatasetKind>(key, v)?,
            "n_points" => t.dataset.n_points = p.get(key, v)?,
            "noise_sd" => t.dataset.noise_sd = p.get(key, v)?,
            "blob_centers" => t.dataset.blob_centers = p.get(key, v)?,
            "n_labeled" => t.dataset.n_labeled = p.get(key, v)?,
            "n_test" => t.dataset.n_test = p.get(key, v)?,
            "sampler" => t.dataset.sampler = p.get::<Sampler>(key, v)?,
            "data_seed" => t.dataset.data_seed = p.get(key, v)?,
            "distance" => t.distance = p.get::<DistanceKind>(key, v)?,
            "consistency_space" => t.consistency_space = p.get::<ConsistencySpace>(key, v)?,
            "stop_gradient" => t.stop_gradient = p.get(key, v)?,
            "lambda_sharing" => t.lambda_sharing = p.get::<LambdaSharing>(key, v)?,
            "sweep_labels" => cfg.sweep_labels = p.get(key, v)?,
            "sweep_methods" => {
                let names: Vec<String> = p.get(key, v)?;
                cfg.sweep_methods = names
                    .iter()
                    .map(|n| {
                        parse_method(n)
                            .map(|(m, k)| (m, k.unwrap_or(if m.uses_k() { 2 } else { 1 })))
                    })
                    .collect::<Result<_, _>>()
                    .map_err(|e| p.invalid(key, e))?;
            }
            "resolution" => cfg.resolution = p.get(key, v)?,
            other => {
                return Err(ConfigError::UnknownKey {
                    path: path.to_path_buf(),
                    line: key_line(text, other),
                    key: other.to_string(),
                    suggestion: suggest_key(other).map(str::to_string),
                })
            }
        }
    }
    if let Some(k) = method_k {
        if map.contains_key("k") && t.k != k {
            return Err(p.invalid("k", format!("conflicts with the K suffix of method ({k})")));
        }
        t.k = k;
    }
    validate(&cfg).map_err(|(key, msg)| p.invalid(key, msg))?;
    Ok(cfg)
}

/// Checks the full config; on failure names the offending key.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), (&'static str, String)> {
    if cfg.seeds.is_empty() {
        return Err(("seeds", "at least one seed is required".into()));
    }
    if cfg.sweep_labels.is_empty() {
        return Err(("sweep_labels", "at least one size is required".into()));
    }
    if cfg.sweep_methods.is_empty() {
        return Err(("sweep_methods", "at least one method is required".into()));
    }
    if cfg.resolution < 2 {
        return Err((
            "resolution",
            format!("must be at least 2, got {}", cfg.resolution),
        ));
    }
    cfg.train.validate().map_err(|e| {
        let msg = e.to_string();
        let key = msg
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .find_map(|w| KEYS.iter().find(|k| **k == w))
            .copied()
            .unwrap_or("method");
        (key, msg)
    })
}
