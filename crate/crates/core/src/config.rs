//! Combined environment and planner settings, read from TOML.
//!
//! ```toml
//! [env]
//! dt_control = 0.05
//! lookahead = 10
//! false_positive = "sounding"
//!
//! [env.hands]
//! mask = "reduced"
//!
//! [planner]
//! candidates = 10
//! sigma = 0.05
//! iterations = 50
//! ```
//!
//! Every field is optional and unknown fields are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::planner::PlannerConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub env: EnvConfig,
    pub planner: PlannerConfig,
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: BenchConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.planner.validate()
    }
}
