//! TOML run configuration: model architecture, training schedule, data split
//! and evaluation sizes. Every table and field is optional.

use crate::error::{CliError, CliResult};
use qposer_core::data::SplitSpec;
use qposer_core::training::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub eval: EvalSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Training poses used as the plausibility reference.
    pub reference_size: usize,
    pub interp_pairs: usize,
    pub interp_steps: usize,
    pub sample_count: usize,
    pub localmod_trials: usize,
    /// Heads per part for the ablation variants; a GLIF-off variant is always added.
    pub ablation_heads: Vec<usize>,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            reference_size: 5000,
            interp_pairs: 50,
            interp_steps: 11,
            sample_count: 1000,
            localmod_trials: 200,
            ablation_heads: vec![1, 4],
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.into(),
            message: e.to_string(),
        })?;
        cfg.train.validate()?;
        cfg.split.validate()?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> CliResult<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}
