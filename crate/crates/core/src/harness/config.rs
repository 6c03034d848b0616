use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::Hyperparams;
use crate::channel::ChannelParams;
use crate::radio::RadioParams;
use crate::scenario::ScenarioConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Train,
    Eval,
    Sweep,
    Selftest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub mode: Mode,
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// Evaluate the policy mean instead of sampling.
    pub mean_action: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { mode: Mode::Train, seed: 1, output_dir: PathBuf::from("out"), checkpoint: None, mean_action: false }
    }
}

/// Everything one run needs. Missing sections and keys take the
/// full-scale defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub scenario: ScenarioConfig,
    pub channel: ChannelParams,
    pub radio: RadioParams,
    pub hyperparams: Hyperparams,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.channel.validate()?;
        self.radio.validate()?;
        self.hyperparams.validate()?;
        if self.scenario.users_per_cluster > self.scenario.hab_antennas {
            return Err(Error::Config(format!(
                "K = {} exceeds N_b = {}",
                self.scenario.users_per_cluster, self.scenario.hab_antennas
            )));
        }
        Ok(())
    }

    /// Hex SHA-256 over everything that affects results: the seed and the
    /// model sections. Paths and mode are left out.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.run.seed.to_le_bytes());
        for part in [
            toml::to_string(&self.scenario),
            toml::to_string(&self.channel),
            toml::to_string(&self.radio),
            toml::to_string(&self.hyperparams),
        ] {
            h.update(part.unwrap_or_default().as_bytes());
            h.update([0]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
