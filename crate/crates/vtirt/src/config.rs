//! TOML run configuration with `[model]`, `[train]` and `[synth]` sections.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vtirt_core::optim::AdamConfig;
use vtirt_core::{ModelConfig, Variant};

use crate::error::{Error, Result};
use crate::synth::SynthConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub variant: Variant,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub val_fraction: f64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub n_samples: usize,
    pub fixed_noise: bool,
    pub signed_item_init: bool,
    pub optimizer: AdamConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            variant: t.variant,
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed: t.seed,
            val_fraction: t.val_fraction,
            patience: t.patience,
            n_samples: t.n_samples,
            fixed_noise: t.fixed_noise,
            signed_item_init: t.signed_item_init,
            optimizer: t.optimizer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n_learners: usize,
    pub n_items: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub model: ModelConfig,
    pub train: TrainSection,
    pub synth: Option<SynthSection>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Usage(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Usage(format!("{}: invalid config: {e}", path.display())))
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            variant: t.variant,
            model: self.model,
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed: t.seed,
            val_fraction: t.val_fraction,
            patience: t.patience,
            n_samples: t.n_samples,
            fixed_noise: t.fixed_noise,
            signed_item_init: t.signed_item_init,
            optimizer: t.optimizer,
        }
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        let s = self.synth.ok_or_else(|| Error::Usage("config has no [synth] section".into()))?;
        Ok(SynthConfig::new(s.n_learners, s.n_items, self.model, s.seed))
    }
}
