use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CheckpointError;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Training progress, enough to resume episode numbering exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    /// Completed training iterations.
    pub iteration: u64,
    /// Training episodes started so far; the next episode's index.
    pub episodes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub agent_kind: String,
    pub config_digest: String,
    pub progress: Progress,
    pub state: serde_json::Value,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("serializable checkpoint")
    }

    /// Parses and checks the format version and agent kind.
    pub fn from_bytes(bytes: &[u8], expected_kind: &str) -> Result<Self, CheckpointError> {
        let value: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| CheckpointError::Corrupt("missing format_version".into()))?;
        if version != u64::from(CHECKPOINT_VERSION) {
            return Err(CheckpointError::VersionMismatch {
                expected: format!("format {CHECKPOINT_VERSION}"),
                found: format!("format {version}"),
            });
        }
        let ckpt: Checkpoint =
            serde_json::from_value(value).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        if ckpt.agent_kind != expected_kind {
            return Err(CheckpointError::VersionMismatch {
                expected: expected_kind.to_string(),
                found: ckpt.agent_kind,
            });
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path, expected_kind: &str) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?, expected_kind)
    }
}
