//! Versioned JSON snapshots of a whole run.
//!
//! Every random draw is derived from `(seed, iteration, purpose)`, so the
//! configuration plus the iteration cursor fully determine the generator
//! state; no generator internals are stored.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::teach::RunState;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub config: RunConfig,
    pub state: RunState,
}

impl Checkpoint {
    pub fn new(config: RunConfig, state: RunState) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config,
            state,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        let version = doc
            .get("schema_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::CorruptCheckpoint("missing schema_version".to_string()))?;
        if version != SCHEMA_VERSION as u64 {
            return Err(Error::SchemaVersion {
                found: version.min(u32::MAX as u64) as u32,
                expected: SCHEMA_VERSION,
            });
        }
        let ckpt: Checkpoint =
            serde_json::from_value(doc).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        ckpt.config
            .validate()
            .map_err(|e| Error::CorruptCheckpoint(format!("embedded config: {e}")))?;
        Ok(ckpt)
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, ckpt.to_json_string()).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_json_str(&text)
}
