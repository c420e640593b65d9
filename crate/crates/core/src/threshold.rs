//! Per-class pseudo-label thresholds driven by confidence mean and variance.
//!
//! Each round the new threshold blends the previous one with a statistical
//! target `alpha_dt * sqrt(mean) - beta * var`, weighted by a logistic
//! smoothing coefficient of training progress, then clamps it to
//! `[min_dt, max_dt]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::pseudo::ClassId;

/// Shape of the smoothing coefficient over training progress `x = iter / total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    /// `1 / (1 + exp(-alpha_at * x))`: rises from 0.5 towards 1.
    Literal,
    /// `1 / (1 + exp(alpha_at * (x - 0.5)))`: falls from near 1 to near 0,
    /// so early thresholds lean on history and late ones on current statistics.
    #[default]
    Described,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VfstConfig {
    pub alpha_dt: f64,
    pub beta: f64,
    pub min_dt: f64,
    pub max_dt: f64,
    pub alpha_at: f64,
    pub gamma_mode: GammaMode,
    /// Confidences below this are not counted in the class statistics.
    pub stats_floor: f64,
    pub n_init: f64,
    /// Zero means "derive from the training loop".
    pub total_iters: u64,
    /// Empty means "use the scenario's classes".
    pub classes: Vec<ClassId>,
}

impl Default for VfstConfig {
    fn default() -> Self {
        Self {
            alpha_dt: 0.5,
            beta: 0.2,
            min_dt: 0.25,
            max_dt: 0.45,
            alpha_at: 10.0,
            gamma_mode: GammaMode::Described,
            stats_floor: 0.05,
            n_init: 0.3,
            total_iters: 0,
            classes: Vec::new(),
        }
    }
}

impl VfstConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha_dt", self.alpha_dt),
            ("beta", self.beta),
            ("min_dt", self.min_dt),
            ("max_dt", self.max_dt),
            ("alpha_at", self.alpha_at),
            ("stats_floor", self.stats_floor),
            ("n_init", self.n_init),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("vfst.{name}"), "must be finite"));
            }
        }
        if !(0.0 <= self.min_dt && self.min_dt <= self.n_init) {
            return Err(Error::config("vfst.min_dt", "must satisfy 0 <= min_dt <= n_init"));
        }
        if !(self.n_init <= self.max_dt && self.max_dt <= 1.0) {
            return Err(Error::config("vfst.max_dt", "must satisfy n_init <= max_dt <= 1"));
        }
        if self.alpha_dt < 0.0 {
            return Err(Error::config("vfst.alpha_dt", "must be >= 0"));
        }
        if self.beta < 0.0 {
            return Err(Error::config("vfst.beta", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.stats_floor) {
            return Err(Error::config("vfst.stats_floor", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

pub fn smoothing_coefficient(current_iter: u64, total_iters: u64, cfg: &VfstConfig) -> Result<f64> {
    if total_iters == 0 {
        return Err(Error::Domain("total_iters must be > 0".to_string()));
    }
    if current_iter > total_iters {
        return Err(Error::Domain(format!(
            "current_iter {current_iter} exceeds total_iters {total_iters}"
        )));
    }
    let x = current_iter as f64 / total_iters as f64;
    let z = match cfg.gamma_mode {
        GammaMode::Literal => -cfg.alpha_at * x,
        GammaMode::Described => cfg.alpha_at * (x - 0.5),
    };
    Ok(1.0 / (1.0 + z.exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub mean: f64,
    /// Population variance.
    pub var: f64,
    pub count: usize,
}

/// Mean and population variance, or `None` for an empty list.
pub fn class_stats(confidences: &[f64]) -> Option<ClassStats> {
    if confidences.is_empty() {
        return None;
    }
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &c) in confidences.iter().enumerate() {
        let delta = c - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (c - mean);
    }
    let n = confidences.len();
    Some(ClassStats {
        mean,
        var: (m2 / n as f64).max(0.0),
        count: n,
    })
}

/// Statistical target before smoothing and clamping.
pub fn threshold_target(mean: f64, var: f64, cfg: &VfstConfig) -> f64 {
    cfg.alpha_dt * mean.sqrt() - cfg.beta * var
}

/// Smoothed blend of history and target, before clamping.
pub fn unclamped_threshold(n_old: f64, mean: f64, var: f64, gamma: f64, cfg: &VfstConfig) -> f64 {
    gamma * n_old + (1.0 - gamma) * threshold_target(mean, var, cfg)
}

pub fn update_threshold(
    n_old: f64,
    mean: f64,
    var: f64,
    gamma: f64,
    cfg: &VfstConfig,
) -> Result<f64> {
    for (name, v) in [("n_old", n_old), ("mean", mean), ("var", var), ("gamma", gamma)] {
        ensure_finite(name, v)?;
    }
    if !(0.0..=1.0).contains(&mean) {
        return Err(Error::Input(format!("mean must lie in [0, 1], got {mean}")));
    }
    if var < 0.0 {
        return Err(Error::Input(format!("var must be >= 0, got {var}")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Input(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let raw = unclamped_threshold(n_old, mean, var, gamma, cfg);
    Ok(raw.min(cfg.max_dt).max(cfg.min_dt))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassThresholdState {
    pub class_id: ClassId,
    pub n: f64,
    pub n_old: f64,
    pub last_mean: f64,
    pub last_var: f64,
    pub sample_count: usize,
}

impl ClassThresholdState {
    pub fn new(class_id: ClassId, cfg: &VfstConfig) -> Self {
        Self {
            class_id,
            n: cfg.n_init,
            n_old: cfg.n_init,
            last_mean: 0.0,
            last_var: 0.0,
            sample_count: 0,
        }
    }
}

/// What one `update_all` round did, for logging.
#[derive(Debug, Clone, PartialEq)]
pub struct VfstRound {
    pub iter: u64,
    pub gamma: f64,
    /// `None` for classes that received no admissible confidences.
    pub stats: BTreeMap<ClassId, Option<ClassStats>>,
}

/// Threshold state for every known class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdBank {
    pub states: BTreeMap<ClassId, ClassThresholdState>,
}

impl ThresholdBank {
    pub fn new(classes: impl IntoIterator<Item = ClassId>, cfg: &VfstConfig) -> Self {
        let states = classes
            .into_iter()
            .map(|c| (c, ClassThresholdState::new(c, cfg)))
            .collect();
        Self { states }
    }

    pub fn thresholds(&self) -> BTreeMap<ClassId, f64> {
        self.states.iter().map(|(&c, s)| (c, s.n)).collect()
    }

    /// One round: a single smoothing coefficient, then an independent update
    /// for every class with at least one confidence at or above `stats_floor`.
    pub fn update_all(
        &mut self,
        batch: &BTreeMap<ClassId, Vec<f64>>,
        current_iter: u64,
        cfg: &VfstConfig,
    ) -> Result<VfstRound> {
        if let Some(unknown) = batch.keys().find(|c| !self.states.contains_key(c)) {
            return Err(Error::Input(format!("unknown class id {unknown} in batch")));
        }
        let gamma = smoothing_coefficient(current_iter, cfg.total_iters, cfg)?;

        let mut updates = Vec::new();
        let mut stats = BTreeMap::new();
        for &class in self.states.keys() {
            let admitted: Vec<f64> = batch
                .get(&class)
                .map(|v| v.iter().copied().filter(|&s| s >= cfg.stats_floor).collect())
                .unwrap_or_default();
            let s = class_stats(&admitted);
            if let Some(s) = s {
                let old = self.states[&class].n;
                let n = update_threshold(old, s.mean, s.var, gamma, cfg)?;
                updates.push((class, old, n, s));
            }
            stats.insert(class, s);
        }
        for (class, old, n, s) in updates {
            let st = self.states.get_mut(&class).expect("class checked above");
            st.n_old = old;
            st.n = n;
            st.last_mean = s.mean;
            st.last_var = s.var;
            st.sample_count = s.count;
        }
        Ok(VfstRound {
            iter: current_iter,
            gamma,
            stats,
        })
    }
}
