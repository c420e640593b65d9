//! Run configuration: one JSON document composing every controller's settings.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::schedule::SchedulerConfig;
use crate::sim::ScenarioConfig;
use crate::teach::{LoopConfig, TrainerSettings};
use crate::threshold::VfstConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub scheduler: SchedulerConfig,
    pub vfst: VfstConfig,
    #[serde(rename = "loop")]
    pub loop_cfg: LoopConfig,
    pub scenario: ScenarioConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = Self {
            seed: 2024,
            output_dir: PathBuf::from("out"),
            scheduler: SchedulerConfig::default(),
            vfst: VfstConfig::default(),
            loop_cfg: LoopConfig::default(),
            scenario: ScenarioConfig::default(),
        };
        cfg.derive_counts(false, false);
        cfg
    }
}

impl RunConfig {
    /// Fills derived fields the document left out.
    fn derive_counts(&mut self, has_epochs: bool, has_iters: bool) {
        if !has_epochs {
            self.scheduler.total_epochs = self.loop_cfg.total_epochs;
        }
        if !has_iters {
            self.vfst.total_iters = self.loop_cfg.total_iters();
        }
        if self.vfst.classes.is_empty() {
            self.vfst.classes = self.scenario.class_ids();
        }
    }

    /// Parses, fills defaults and derived fields, and validates.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)
            .map_err(|e| Error::config("<document>", format!("invalid JSON: {e}")))?;
        let has_epochs = doc.pointer("/scheduler/total_epochs").is_some();
        let has_iters = doc
            .pointer("/vfst/total_iters")
            .and_then(Value::as_u64)
            .is_some_and(|v| v != 0);
        let mut cfg: RunConfig = serde_json::from_value(doc).map_err(|e| {
            let msg = e.to_string();
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<document>".to_string());
            Error::config(field, msg)
        })?;
        cfg.derive_counts(has_epochs, has_iters);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.loop_cfg.iters_per_epoch < 1 {
            return Err(Error::config("loop.iters_per_epoch", "must be >= 1"));
        }
        let vfst_classes: BTreeSet<_> = self.vfst.classes.iter().collect();
        let scenario_classes: BTreeSet<_> = self.scenario.classes.iter().map(|c| &c.id).collect();
        if vfst_classes != scenario_classes || vfst_classes.len() != self.vfst.classes.len() {
            return Err(Error::config(
                "vfst.classes",
                "must list exactly the scenario's class ids",
            ));
        }
        self.settings().validate()
    }

    pub fn settings(&self) -> TrainerSettings {
        TrainerSettings {
            scheduler: self.scheduler.clone(),
            vfst: self.vfst.clone(),
            loop_cfg: self.loop_cfg.clone(),
            seed: self.seed,
        }
    }
}
