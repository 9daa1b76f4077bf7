use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uip_core::pipeline::{FilterConfig, SimConfig};
use uip_core::posenet::{PoseNetConfig, TrainConfig};
use uip_core::skeleton::MotionKind;

use crate::error::{CliError, CliResult};

/// Everything a run depends on. Each output directory gets a copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Motion kinds, one clip each.
    pub catalog: Vec<String>,
    pub clip_duration_s: f64,
    /// Body height of the simulated subject (m).
    pub height: f64,
    pub sim: SimConfig,
    pub filter: FilterConfig,
    pub model: PoseNetConfig,
    pub train: TrainConfig,
    /// Base directory for outputs when `--out` is not given.
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            catalog: MotionKind::ALL.iter().map(|k| k.as_str().to_string()).collect(),
            clip_duration_s: 20.0,
            height: 1.75,
            sim: SimConfig::default(),
            filter: FilterConfig::default(),
            model: PoseNetConfig::default(),
            train: TrainConfig::default(),
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.catalog.is_empty() {
            return Err(CliError::Config("`catalog` is empty".into()));
        }
        for k in &self.catalog {
            k.parse::<MotionKind>().map_err(|_| CliError::Config(format!("`catalog` has unknown motion `{k}`")))?;
        }
        if !(self.clip_duration_s.is_finite() && self.clip_duration_s > 0.0) {
            return Err(CliError::Config("`clip_duration_s` must be positive".into()));
        }
        self.sim.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if !(self.filter.orientation_gain > 0.0 && self.filter.orientation_gain < 1.0) {
            return Err(CliError::Config("`filter.orientation_gain` must lie in (0, 1)".into()));
        }
        if self.filter.ransac_iters == 0 || !(self.filter.ransac_tol > 0.0) {
            return Err(CliError::Config("`filter.ransac_iters` and `filter.ransac_tol` must be positive".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}
