//! Tool configuration, read from TOML. A missing file means defaults.

use crate::detect::DEFAULT_TAU;
use crate::embed::EmbedObjective;
use crate::netlist::SynthConfig;
use crate::sim::EquivBudget;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Overrides `synth.command`.
pub const SYNTH_ENV: &str = "RTLMARK_SYNTH";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{0}: {1}")]
    Syntax(PathBuf, String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub key_file: Option<PathBuf>,
    pub null_model: Option<PathBuf>,
    pub tau: f64,
    pub objective: Weights,
    pub synth: SynthConfig,
    pub budget: EquivBudget,
    /// Evaluation worker threads; 0 picks one per core.
    pub workers: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub m: f64,
    pub n: f64,
}

impl Default for Weights {
    fn default() -> Weights {
        Weights { m: 1.0, n: 1.0 }
    }
}

impl Default for Config {
    fn default() -> Config {
        Config {
            key_file: None,
            null_model: None,
            tau: DEFAULT_TAU,
            objective: Weights::default(),
            synth: SynthConfig::default(),
            budget: EquivBudget::default(),
            workers: 0,
        }
    }
}

impl Config {
    pub fn parse(text: &str, origin: &Path) -> Result<Config, ConfigError> {
        let c: Config = toml::from_str(text).map_err(|e| ConfigError::Syntax(origin.to_path_buf(), e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Load `path` if it exists, then apply the environment override.
    pub fn load(path: Option<&Path>) -> Result<Config, ConfigError> {
        let mut c = match path {
            Some(p) if p.exists() => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io(p.to_path_buf(), e))?;
                Config::parse(&text, p)?
            }
            _ => Config::default(),
        };
        if let Ok(cmd) = std::env::var(SYNTH_ENV) {
            if !cmd.trim().is_empty() {
                c.synth.command = cmd;
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.objective().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.budget.vectors == 0 || self.budget.cycles == 0 {
            return Err(ConfigError::Invalid("equivalence budget must be positive".into()));
        }
        if self.budget.exhaustive_bits > 24 {
            return Err(ConfigError::Invalid("exhaustive_bits above 24".into()));
        }
        if self.synth.timeout_secs == 0 {
            return Err(ConfigError::Invalid("synth timeout must be positive".into()));
        }
        for p in ["{input}", "{output}"] {
            if !self.synth.command.contains(p) {
                return Err(ConfigError::Invalid(format!("synth command lacks {p}")));
            }
        }
        Ok(())
    }

    pub fn objective(&self) -> Result<EmbedObjective, crate::embed::EmbedError> {
        EmbedObjective::new(self.objective.m, self.objective.n, self.tau)
    }
}
