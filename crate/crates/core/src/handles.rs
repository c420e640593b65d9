//! Self-contained controller handles for host training loops.
//!
//! Each handle pairs a configuration with its evolving state and can export
//! the state as JSON and restore it later, so an external loop can drive the
//! controllers one iteration at a time and checkpoint them on its own terms.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pseudo::ClassId;
use crate::schedule::{SchedulerConfig, SchedulerState};
use crate::threshold::{ThresholdBank, VfstConfig};

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("controller state serialises")
}

fn from_json<T: DeserializeOwned>(what: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Data(format!("{what} state: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerHandle {
    pub config: SchedulerConfig,
    pub state: SchedulerState,
}

impl SchedulerHandle {
    pub fn new(config: SchedulerConfig) -> Result<Self> {
        config.validate()?;
        let state = SchedulerState::new(&config);
        Ok(Self { config, state })
    }

    /// Feeds one loss; returns the new mask ratio and the step size used.
    pub fn step(&mut self, loss: f64) -> Result<(f64, f64)> {
        self.state.update_mask_ratio(&self.config, loss)?;
        Ok((self.state.mu_t, self.state.eta))
    }

    pub fn advance_epoch(&mut self) -> Result<()> {
        self.state.advance_epoch(&self.config)
    }

    pub fn export_state(&self) -> String {
        to_json(&self.state)
    }

    pub fn import_state(config: SchedulerConfig, state_json: &str) -> Result<Self> {
        config.validate()?;
        let state: SchedulerState = from_json("scheduler", state_json)?;
        if state.loss_history.len() > config.loss_window {
            return Err(Error::Data(format!(
                "scheduler state: {} losses exceed window {}",
                state.loss_history.len(),
                config.loss_window
            )));
        }
        Ok(Self { config, state })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VfstHandle {
    pub config: VfstConfig,
    pub bank: ThresholdBank,
}

impl VfstHandle {
    /// `config.total_iters` must be set; `config.classes` lists the tracked classes.
    pub fn new(config: VfstConfig) -> Result<Self> {
        config.validate()?;
        if config.total_iters == 0 {
            return Err(Error::Config {
                field: "vfst.total_iters".to_string(),
                constraint: "must be > 0 for a standalone controller".to_string(),
            });
        }
        let bank = ThresholdBank::new(config.classes.iter().copied(), &config);
        Ok(Self { config, bank })
    }

    /// One round on per-class confidences at iteration `current_iter`.
    pub fn step(
        &mut self,
        batch: &BTreeMap<ClassId, Vec<f64>>,
        current_iter: u64,
    ) -> Result<BTreeMap<ClassId, f64>> {
        self.bank.update_all(batch, current_iter, &self.config)?;
        Ok(self.bank.thresholds())
    }

    pub fn thresholds(&self) -> BTreeMap<ClassId, f64> {
        self.bank.thresholds()
    }

    pub fn export_state(&self) -> String {
        to_json(&self.bank)
    }

    pub fn import_state(config: VfstConfig, state_json: &str) -> Result<Self> {
        let mut h = Self::new(config)?;
        let bank: ThresholdBank = from_json("vfst", state_json)?;
        if !bank.states.keys().eq(h.bank.states.keys()) {
            return Err(Error::Data(
                "vfst state: class ids differ from the configuration".to_string(),
            ));
        }
        h.bank = bank;
        Ok(h)
    }
}
