use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use viscal::data::sim::SimConfig;
use viscal::training::ExperimentConfig;
use viscal::verification::ReportConfig;

/// One JSON document describing a run. Every block is optional and falls
/// back to its defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub simulation: SimConfig,
    pub experiment: ExperimentConfig,
    pub report: ReportConfig,
    pub paths: Paths,
    /// Reference whose scores are the denominator of the report ratios.
    pub ratio_reference: Option<String>,
}

/// Input locations; relative paths are resolved against the output directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub forecasts: Option<PathBuf>,
    pub observations: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(viscal::Error::from)
            .with_context(|| format!("parsing config {}", path.display()))
    }
}
