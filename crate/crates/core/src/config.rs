//! Experiment configuration and its JSON form.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::multiagent::{BanditSignal, Mode};
use crate::policy::Schedules;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub schedules: Schedules,
    /// Exploration rate of the on-trajectory Q-learning baseline.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub n_agents: usize,
    pub mode: Mode,
    /// Quantity the bandit policy averages per pair.
    #[serde(default)]
    pub bandit_signal: BanditSignal,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_gamma() -> f64 {
    0.9
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_trials() -> usize {
    100
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Defaults everywhere except the agent count and mode.
    pub fn new(n_agents: usize, mode: Mode) -> Self {
        ExperimentConfig {
            grid: GridSpec::default(),
            gamma: default_gamma(),
            schedules: Schedules::default(),
            epsilon: default_epsilon(),
            n_agents,
            mode,
            bandit_signal: BanditSignal::default(),
            trials: default_trials(),
            master_seed: 0,
            output_dir: default_output_dir(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate().map_err(|e| Error::config("grid", e.to_string()))?;
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma", format!("{} is outside [0, 1)", self.gamma)));
        }
        self.schedules.validate()?;
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::config(
                "epsilon",
                format!("{} is not a probability", self.epsilon),
            ));
        }
        let k = self.grid.n_pairs();
        if self.n_agents == 0 || self.n_agents > k {
            return Err(Error::config(
                "n_agents",
                format!("{} is infeasible; must lie in [1, {k}] for this grid", self.n_agents),
            ));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "at least one trial is required"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." { "<root>".to_string() } else { path };
            Error::config(key, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_json(&text)
}

pub fn save_config(cfg: &ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, cfg.to_json() + "\n").map_err(|e| Error::io(path, e))
}
