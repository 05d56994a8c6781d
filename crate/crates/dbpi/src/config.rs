//! Run configuration: one JSON or TOML file per run, overridden by flags.

use crate::{CliError, Result};
use dbpi_core::adminframe::CriteriaParams;
use dbpi_core::designs::DesignKind;
use dbpi_core::editing::ContinuousSpecs;
use dbpi_core::popframe::SimulationConfig;
use dbpi_core::predictors::TrainSpec;
use dbpi_core::timedisagg::{BOOTSTRAP_RESAMPLES, DEFAULT_WINDOW};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When set, the file may only drive this subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignKind>,
    /// Candidate models; the first is used where only one is needed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predictors: Vec<TrainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub editing: EditingConfig,
    #[serde(default)]
    pub early: EarlyConfig,
    #[serde(default)]
    pub admin: AdminConfig,
    #[serde(default)]
    pub time: TimeConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub historic: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margins: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    #[default]
    Categorical,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditingConfig {
    #[serde(default)]
    pub mode: ScoreMode,
    /// Share of the batch flagged for manual review.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuous: Option<ContinuousSpecs>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyConfig {
    /// `YYYY-MM`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdminConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<CriteriaParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<PathBuf>,
    /// Points of the quantile grid for the diagnostics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantile_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quarter: Option<u32>,
    #[serde(default = "default_window")]
    pub window: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weeks_per_month: Option<Vec<u32>>,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
}

fn default_window() -> u32 {
    DEFAULT_WINDOW
}

fn default_resamples() -> usize {
    BOOTSTRAP_RESAMPLES
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { quarter: None, window: DEFAULT_WINDOW, weeks_per_month: None, resamples: BOOTSTRAP_RESAMPLES }
    }
}

fn is_toml(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"))
}

impl RunConfig {
    /// TOML when the extension is `.toml`, JSON otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, is_toml(path)).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str, toml: bool) -> std::result::Result<Self, String> {
        if toml {
            toml::from_str(text).map_err(|e| e.to_string())
        } else {
            serde_json::from_str(text).map_err(|e| e.to_string())
        }
    }

    pub fn to_text(&self, toml: bool) -> String {
        if toml {
            toml::to_string(self).expect("config serializes")
        } else {
            serde_json::to_string_pretty(self).expect("config serializes")
        }
    }

    pub fn check_subcommand(&self, name: &str) -> Result<()> {
        match &self.subcommand {
            Some(s) if s != name => Err(CliError::Config(format!("config is for `{s}`, not `{name}`"))),
            _ => Ok(()),
        }
    }
}
