//! Loss-feedback mask-ratio controller.
//!
//! The step size follows an inverted logistic curve over training progress,
//! large early and small late. The mask ratio moves by one step per update:
//! down when the current loss is at or above the mean of the recent window,
//! up otherwise, and is clamped to a configured band.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// When the mask ratio reacts to loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateCadence {
    /// One ratio update per training iteration; step size still changes per epoch.
    #[default]
    PerIteration,
    /// One ratio update per epoch, fed the mean loss of that epoch.
    PerEpoch,
}

/// Which loss drives the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossSource {
    /// Reconstruction loss only.
    #[default]
    Mask,
    /// Reconstruction plus teaching loss.
    Total,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    pub eta_min: f64,
    pub eta_max: f64,
    /// Logistic steepness.
    pub k: f64,
    /// Training fraction at which the step size is halfway between its bounds.
    pub midpoint: f64,
    pub mu_0: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub loss_window: usize,
    pub total_epochs: u64,
    pub cadence: UpdateCadence,
    pub loss_source: LossSource,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            eta_min: 0.01,
            eta_max: 0.02,
            k: 10.0,
            midpoint: 0.5,
            mu_0: 0.5,
            mu_min: 0.1,
            mu_max: 0.9,
            loss_window: 3,
            total_epochs: 100,
            cadence: UpdateCadence::default(),
            loss_source: LossSource::default(),
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("eta_min", self.eta_min),
            ("eta_max", self.eta_max),
            ("k", self.k),
            ("midpoint", self.midpoint),
            ("mu_0", self.mu_0),
            ("mu_min", self.mu_min),
            ("mu_max", self.mu_max),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::config(format!("scheduler.{name}"), "must be finite"));
            }
        }
        if self.eta_min < 0.0 {
            return Err(Error::config("scheduler.eta_min", "must be >= 0"));
        }
        if self.eta_min > self.eta_max {
            return Err(Error::config(
                "scheduler.eta_min",
                format!("must be <= eta_max ({} > {})", self.eta_min, self.eta_max),
            ));
        }
        if self.k <= 0.0 {
            return Err(Error::config("scheduler.k", "must be > 0"));
        }
        if !(0.0 <= self.mu_min && self.mu_min <= self.mu_0) {
            return Err(Error::config(
                "scheduler.mu_min",
                "must satisfy 0 <= mu_min <= mu_0",
            ));
        }
        if !(self.mu_0 <= self.mu_max && self.mu_max <= 1.0) {
            return Err(Error::config(
                "scheduler.mu_max",
                "must satisfy mu_0 <= mu_max <= 1",
            ));
        }
        if self.loss_window < 1 {
            return Err(Error::config("scheduler.loss_window", "must be >= 1"));
        }
        if self.total_epochs < 1 {
            return Err(Error::config("scheduler.total_epochs", "must be >= 1"));
        }
        Ok(())
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Step size at training fraction `x`, between `eta_max` (early) and `eta_min` (late).
pub fn step_size(x: f64, cfg: &SchedulerConfig) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "epoch fraction must lie in [0, 1], got {x}"
        )));
    }
    let sigma = logistic(cfg.k * (x - cfg.midpoint));
    Ok(cfg.eta_min + (cfg.eta_max - cfg.eta_min) * (1.0 - sigma))
}

/// Outcome of one ratio update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskUpdate {
    pub l_mean: f64,
    pub decreased: bool,
    pub clamped: bool,
    pub mu_before: f64,
    pub mu_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerState {
    pub mu_t: f64,
    pub eta: f64,
    pub epoch: u64,
    /// Most recent losses, oldest first. Never longer than `loss_window`.
    pub loss_history: VecDeque<f64>,
    pub update_count: u64,
}

impl SchedulerState {
    pub fn new(cfg: &SchedulerConfig) -> Self {
        Self {
            mu_t: cfg.mu_0,
            eta: cfg.eta_max,
            epoch: 0,
            loss_history: VecDeque::with_capacity(cfg.loss_window),
            update_count: 0,
        }
    }

    /// Reference loss for the comparison: mean of the full window, or the
    /// current loss itself while the window is still filling.
    pub fn loss_baseline(&self, cfg: &SchedulerConfig, l_current: f64) -> Result<f64> {
        check_loss(l_current)?;
        let n = cfg.loss_window;
        if self.loss_history.len() >= n {
            let sum: f64 = self.loss_history.iter().rev().take(n).sum();
            Ok(sum / n as f64)
        } else {
            Ok(l_current)
        }
    }

    pub fn update_mask_ratio(
        &mut self,
        cfg: &SchedulerConfig,
        l_current: f64,
    ) -> Result<MaskUpdate> {
        let l_mean = self.loss_baseline(cfg, l_current)?;
        let mu_before = self.mu_t;
        let decreased = l_current >= l_mean;
        let raw = if decreased {
            mu_before - self.eta
        } else {
            mu_before + self.eta
        };
        let mu_after = raw.clamp(cfg.mu_min, cfg.mu_max);
        self.mu_t = mu_after;

        while self.loss_history.len() >= cfg.loss_window {
            self.loss_history.pop_front();
        }
        self.loss_history.push_back(l_current);
        self.update_count += 1;

        Ok(MaskUpdate {
            l_mean,
            decreased,
            clamped: raw != mu_after,
            mu_before,
            mu_after,
        })
    }

    /// Moves to the next epoch and recomputes the step size for it.
    pub fn advance_epoch(&mut self, cfg: &SchedulerConfig) -> Result<()> {
        if self.epoch >= cfg.total_epochs {
            return Err(Error::State(format!(
                "cannot advance past epoch {} of {}",
                self.epoch, cfg.total_epochs
            )));
        }
        self.epoch += 1;
        self.eta = step_size(self.epoch as f64 / cfg.total_epochs as f64, cfg)?;
        Ok(())
    }
}

fn check_loss(l: f64) -> Result<()> {
    ensure_finite("loss", l)?;
    if l < 0.0 {
        return Err(Error::Input(format!("loss must be >= 0, got {l}")));
    }
    Ok(())
}

/// Seeded loss curve `1/(1 + 0.02·t)` plus uniform noise in `±noise`,
/// floored at zero. Used for controller traces and replays.
pub fn synthetic_losses(n: usize, seed: u64, noise: f64) -> Result<Vec<f64>> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Domain(format!("noise must be finite and >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|t| {
            let trend = 1.0 / (1.0 + 0.02 * t as f64);
            (trend + rng.random_range(-noise..=noise)).max(0.0)
        })
        .collect())
}
