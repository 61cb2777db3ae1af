//! Checkpoints are pretty-printed JSON. `serde_json` is built with
//! `float_roundtrip`, so every parameter reloads bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::PolicyNet;
use super::ppo::PpoConfig;
use super::LearnerError;

pub const CHECKPOINT_FORMAT: &str = "toolsched-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub seed: u64,
    pub shield: bool,
    /// Fingerprint of the scenario the network was trained on.
    pub scenario_fingerprint: u64,
    pub ppo: PpoConfig,
    pub input: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(net: &PolicyNet, ppo: &PpoConfig, seed: u64, shield: bool, scenario_fingerprint: u64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            seed,
            shield,
            scenario_fingerprint,
            ppo: ppo.clone(),
            input: net.input_len(),
            hidden: net.hidden(),
            params: net.params().to_vec(),
        }
    }

    pub fn network(&self) -> Result<PolicyNet, LearnerError> {
        PolicyNet::from_params(self.input, self.hidden, self.params.clone())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, LearnerError> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| LearnerError::Checkpoint(e.to_string()))?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(LearnerError::Checkpoint(format!(
                "unsupported format `{}` (expected {CHECKPOINT_FORMAT})",
                c.format
            )));
        }
        if c.params.iter().any(|p| !p.is_finite()) {
            return Err(LearnerError::Checkpoint("non-finite parameter".into()));
        }
        c.network()?;
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LearnerError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| LearnerError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LearnerError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| LearnerError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }
}
