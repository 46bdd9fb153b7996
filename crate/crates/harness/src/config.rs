use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qscs_core::env::EnvConfig;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Dqn,
    Ppo,
    Ensemble,
    Mpc,
    Random,
    AlwaysOff,
    AlwaysOn,
}

impl AgentKind {
    pub const ALL: [AgentKind; 7] = [
        AgentKind::Dqn,
        AgentKind::Ppo,
        AgentKind::Ensemble,
        AgentKind::Mpc,
        AgentKind::Random,
        AgentKind::AlwaysOff,
        AgentKind::AlwaysOn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::Ppo => "ppo",
            AgentKind::Ensemble => "ensemble",
            AgentKind::Mpc => "mpc",
            AgentKind::Random => "random",
            AgentKind::AlwaysOff => "always_off",
            AgentKind::AlwaysOn => "always_on",
        }
    }

    /// Whether the agent has parameters that change during training.
    pub fn learns(self) -> bool {
        matches!(self, AgentKind::Dqn | AgentKind::Ppo | AgentKind::Ensemble)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| HarnessError::Config(format!("unknown agent kind `{s}`")))
    }
}

/// One training run. Field names double as the JSON config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub agent: AgentKind,
    pub env: EnvConfig,
    pub episodes: usize,
    pub seed: u64,
    pub lr: f64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            agent: AgentKind::Dqn,
            env: EnvConfig::default(),
            episodes: 1000,
            seed: 0,
            lr: 5e-4,
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(HarnessError::Config("episodes must be >= 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(HarnessError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        self.env.validate()?;
        Ok(())
    }

    /// Reads a JSON config; unknown keys are rejected by name.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let config: Self =
            serde_json::from_str(&text).map_err(|source| HarnessError::ConfigFile { path: path.to_owned(), source })?;
        config.validate()?;
        Ok(config)
    }
}

/// SplitMix64 finaliser over `(base, index)`: decorrelated per-cell seeds.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
