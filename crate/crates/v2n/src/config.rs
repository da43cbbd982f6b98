//! Run configuration: JSON file with strict schema, defaults applied from
//! the evaluation-parameter table.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use v2n_core::neural::{ModelKind, NetConfig};
use v2n_core::smoothing::SmoothingConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Schema(String),
    #[error("invalid smoothing config: {0}")]
    Smoothing(#[from] v2n_core::smoothing::SmoothingError),
    #[error("invalid neural config: {0}")]
    Neural(#[from] v2n_core::neural::NeuralError),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    dataset: Option<String>,
    output_dir: Option<String>,
    seed: Option<u64>,
    smoothing: RawSmoothing,
    neural: RawNeural,
    policies: Option<Vec<String>>,
    services: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSmoothing {
    alpha: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    season_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawNeural {
    hidden_layers: Option<usize>,
    neurons: Option<usize>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    history: Option<usize>,
    learning_rate: Option<f64>,
    flow_only: Option<bool>,
}

/// Fully-resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub smoothing: SmoothingConfig,
    neural: RawNeural,
    pub policies: Vec<String>,
    pub services: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            smoothing: SmoothingConfig::default(),
            neural: RawNeural::default(),
            policies: vec!["max".into(), "avg".into(), "n_min".into()],
            services: vec![
                "remote_driving".into(),
                "cooperative_awareness".into(),
                "hazard_warning".into(),
            ],
        }
    }
}

impl RunConfig {
    /// Per-family network config: table defaults with the file's overrides
    /// applied on top.
    pub fn net_config(&self, kind: ModelKind) -> Result<NetConfig, ConfigError> {
        let mut cfg = NetConfig::defaults(kind);
        let o = &self.neural;
        if let Some(v) = o.hidden_layers {
            cfg.hidden_layers = v;
        }
        if let Some(v) = o.neurons {
            cfg.neurons = v;
        }
        if let Some(v) = o.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = o.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = o.history {
            cfg.history = v;
        }
        if let Some(v) = o.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = o.flow_only {
            cfg.flow_only = v;
        }
        cfg.seed = self.seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn resolve(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let defaults = RunConfig::default();
    let mut smoothing = defaults.smoothing;
    if let Some(v) = raw.smoothing.alpha {
        smoothing.alpha = v;
    }
    if let Some(v) = raw.smoothing.beta {
        smoothing.beta = v;
    }
    if let Some(v) = raw.smoothing.gamma {
        smoothing.gamma = v;
    }
    if let Some(v) = raw.smoothing.season_steps {
        smoothing.season_steps = v;
    }
    smoothing.validate()?;
    Ok(RunConfig {
        dataset: raw.dataset.map(PathBuf::from),
        output_dir: raw
            .output_dir
            .map(PathBuf::from)
            .unwrap_or(defaults.output_dir),
        seed: raw.seed.unwrap_or(defaults.seed),
        smoothing,
        neural: raw.neural,
        policies: raw.policies.unwrap_or(defaults.policies),
        services: raw.services.unwrap_or(defaults.services),
    })
}

/// Parses a JSON config string; unknown keys are rejected with the field
/// path.
pub fn parse_config(json: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig =
        serde_json::from_str(json).map_err(|e| ConfigError::Schema(e.to_string()))?;
    resolve(raw)
}

/// Loads and resolves a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}
