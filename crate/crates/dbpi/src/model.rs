//! Versioned JSON container for fitted models.

use crate::{CliError, Result};
use dbpi_core::predictors::{Predictor, TrainSpec};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MODEL_FORMAT: &str = "dbpi-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelContainer {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub hyperparameters: TrainSpec,
    pub state: Predictor,
}

impl ModelContainer {
    pub fn new(predictor: &Predictor) -> Self {
        ModelContainer {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            kind: predictor.spec().model.name().into(),
            hyperparameters: predictor.spec().clone(),
            state: predictor.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::format(path, e))?;
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Predictor> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let c: ModelContainer = serde_json::from_str(&text).map_err(|e| CliError::format(path, e))?;
        if c.format != MODEL_FORMAT {
            return Err(CliError::format(path, format!("not a model file (format `{}`)", c.format)));
        }
        if c.version != MODEL_VERSION {
            return Err(CliError::format(path, format!("unsupported model version {}", c.version)));
        }
        if c.state.spec() != &c.hyperparameters {
            return Err(CliError::format(path, "hyperparameters disagree with the stored state"));
        }
        Ok(c.state)
    }
}
