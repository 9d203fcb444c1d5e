//! JSON checkpoints: trained parameters plus optional optimizer state for resuming.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vtirt_core::params::ParamStore;
use vtirt_core::{ModelConfig, TrainedModel, Variant};

use crate::error::{Error, Result};
use crate::train::TrainingState;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedArray {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub variant: Variant,
    pub model: ModelConfig,
    pub items: Vec<String>,
    pub params: Vec<NamedArray>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingState>,
}

pub fn store_arrays(store: &ParamStore) -> Vec<NamedArray> {
    store.arrays().map(|(name, values)| NamedArray { name: name.to_owned(), values: values.to_vec() }).collect()
}

pub fn store_from_arrays(arrays: &[NamedArray]) -> Result<ParamStore> {
    let mut store = ParamStore::new();
    for a in arrays {
        store.add(a.name.clone(), a.values.clone())?;
    }
    Ok(store)
}

impl Checkpoint {
    pub fn new(model: &TrainedModel, training: Option<TrainingState>) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            variant: model.variant,
            model: model.model,
            items: model.items.clone(),
            params: store_arrays(&model.store),
            training,
        }
    }

    pub fn trained_model(&self) -> Result<TrainedModel> {
        let store = store_from_arrays(&self.params)?;
        Ok(TrainedModel::new(self.variant, self.model, self.items.clone(), store)?)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Data(format!("invalid checkpoint: {e}")))?;
        if c.format_version != FORMAT_VERSION {
            return Err(Error::Data(format!("unsupported checkpoint format version {}", c.format_version)));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
