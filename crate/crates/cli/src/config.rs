use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wits_core::mtdl::Hyperparams;
use wits_core::recognizer::{ScoringMode, DEFAULT_QUANTILE};
use wits_core::signal::PipelineOptions;

use crate::{CliError, CliResult};

/// Contents of a `--config` file. Every section is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub hyper: Hyperparams,
    pub pipeline: PipelineOptions,
    /// Class order for training; defaults to labels in order of appearance.
    pub classes: Vec<String>,
    pub quantile: f64,
    pub scoring: ScoringMode,
    /// Folds for the out-of-fold threshold calibration. Below 2, the
    /// threshold comes from in-sample training scores.
    pub calibration_folds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hyper: Hyperparams::default(),
            pipeline: PipelineOptions::default(),
            classes: Vec::new(),
            quantile: DEFAULT_QUANTILE,
            scoring: ScoringMode::Full,
            calibration_folds: 5,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Ok(serde_json::from_str(&text)?)
            }
        }
    }
}
