//! Spatial masking of feature maps and the reconstruction losses.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Dense `channels × height × width` grid, row-major, one pyramid level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub level: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(
        level: usize,
        channels: usize,
        height: usize,
        width: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Input(format!(
                "feature map dimensions must be >= 1, got {channels}x{height}x{width}"
            )));
        }
        if values.len() != channels * height * width {
            return Err(Error::Input(format!(
                "feature map expects {} values, got {}",
                channels * height * width,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Input(format!("feature map value {bad} is not finite")));
        }
        Ok(Self {
            level,
            channels,
            height,
            width,
            values,
        })
    }

    pub fn zeros(level: usize, channels: usize, height: usize, width: usize) -> Self {
        Self {
            level,
            channels,
            height,
            width,
            values: vec![0.0; channels * height * width],
        }
    }

    #[inline]
    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.values[c * self.plane() + y * self.width + x]
    }

    pub fn same_shape(&self, other: &FeatureMap) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }
}

/// Binary spatial mask for one level; `true` marks a hidden position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPlan {
    pub level: usize,
    pub height: usize,
    pub width: usize,
    pub mask: Vec<bool>,
    pub ratio_used: f64,
    pub seed: u64,
}

impl MaskPlan {
    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Number of positions hidden at ratio `mu` on an `h × w` grid.
pub fn masked_positions(h: usize, w: usize, mu: f64) -> usize {
    ((mu * (h * w) as f64).floor() as usize).min(h * w)
}

/// Seed for one level of one step. The level occupies the high bits so that
/// (level, step) pairs never collide for steps below 2^48.
pub fn derive_seed(run_seed: u64, level: usize, step: u64) -> u64 {
    run_seed ^ ((level as u64) << 48) ^ step
}

/// Hides exactly `floor(mu·h·w)` positions chosen uniformly without replacement.
pub fn generate_mask(level: usize, h: usize, w: usize, mu: f64, seed: u64) -> Result<MaskPlan> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::Domain(format!("mask ratio must lie in [0, 1], got {mu}")));
    }
    let n = h * w;
    let k = masked_positions(h, w, mu);
    let mut mask = vec![false; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in index::sample(&mut rng, n, k) {
        mask[i] = true;
    }
    Ok(MaskPlan {
        level,
        height: h,
        width: w,
        mask,
        ratio_used: mu,
        seed,
    })
}

/// Replaces every channel at each masked position by `token`.
pub fn apply_mask(f: &FeatureMap, plan: &MaskPlan, token: f64) -> Result<FeatureMap> {
    if plan.height != f.height || plan.width != f.width || plan.mask.len() != f.plane() {
        return Err(Error::Input(format!(
            "mask {}x{} does not match feature map {}x{}",
            plan.height, plan.width, f.height, f.width
        )));
    }
    ensure_finite("mask token", token)?;
    let mut out = f.clone();
    let plane = f.plane();
    for (p, _) in plan.mask.iter().enumerate().filter(|(_, &m)| m) {
        for c in 0..f.channels {
            out.values[c * plane + p] = token;
        }
    }
    Ok(out)
}

/// Mean squared error over every element.
pub fn mse_loss(recon: &FeatureMap, target: &FeatureMap) -> Result<f64> {
    if !recon.same_shape(target) {
        return Err(Error::Input(format!(
            "shape mismatch: {}x{}x{} vs {}x{}x{}",
            recon.channels, recon.height, recon.width, target.channels, target.height, target.width
        )));
    }
    let sum: f64 = recon
        .values
        .iter()
        .zip(&target.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / recon.values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPair {
    pub l_mask: f64,
    pub l_teach: f64,
    pub total: f64,
}

pub fn total_loss(l_mask: f64, l_teach: f64) -> Result<LossPair> {
    for (name, v) in [("l_mask", l_mask), ("l_teach", l_teach)] {
        ensure_finite(name, v)?;
        if v < 0.0 {
            return Err(Error::Input(format!("{name} must be >= 0, got {v}")));
        }
    }
    Ok(LossPair {
        l_mask,
        l_teach,
        total: l_mask + l_teach,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_2x2(vals: [f64; 4]) -> FeatureMap {
        FeatureMap::new(0, 1, 2, 2, vals.to_vec()).unwrap()
    }

    #[test]
    fn mask_counts() {
        assert_eq!(generate_mask(0, 8, 8, 0.3, 1).unwrap().masked_count(), 19);
        assert_eq!(generate_mask(0, 8, 8, 0.0, 1).unwrap().masked_count(), 0);
        assert_eq!(generate_mask(0, 8, 8, 1.0, 1).unwrap().masked_count(), 64);
    }

    #[test]
    fn mask_is_deterministic_per_seed() {
        let a = generate_mask(0, 4, 4, 0.25, 42).unwrap();
        let b = generate_mask(0, 4, 4, 0.25, 42).unwrap();
        assert_eq!(a.masked_count(), 4);
        assert_eq!(a, b);
        let c = generate_mask(0, 4, 4, 0.25, 43).unwrap();
        assert_eq!(c.masked_count(), 4);
    }

    #[test]
    fn mask_rejects_bad_ratio() {
        assert!(generate_mask(0, 4, 4, 1.5, 0).is_err());
        assert!(generate_mask(0, 4, 4, -0.1, 0).is_err());
    }

    #[test]
    fn mask_count_sweep() {
        for h in 1..=16 {
            for w in 1..=16 {
                for step in 0..=10 {
                    let mu = step as f64 / 10.0;
                    let plan = generate_mask(0, h, w, mu, (h * 100 + w) as u64).unwrap();
                    assert_eq!(
                        plan.masked_count(),
                        (mu * (h * w) as f64).floor() as usize,
                        "h={h} w={w} mu={mu}"
                    );
                }
            }
        }
    }

    #[test]
    fn apply_mask_cases() {
        let f = map_2x2([1.0, 2.0, 3.0, 4.0]);
        let none = generate_mask(0, 2, 2, 0.0, 0).unwrap();
        assert_eq!(apply_mask(&f, &none, 9.0).unwrap(), f);

        let all = generate_mask(0, 2, 2, 1.0, 0).unwrap();
        assert!(apply_mask(&f, &all, 0.0).unwrap().values.iter().all(|&v| v == 0.0));

        let mut one = none.clone();
        one.mask[0] = true;
        assert_eq!(
            apply_mask(&f, &one, 7.0).unwrap().values,
            vec![7.0, 2.0, 3.0, 4.0]
        );
    }

    #[test]
    fn apply_mask_covers_all_channels_and_checks_shape() {
        let f = FeatureMap::new(0, 3, 2, 2, (0..12).map(f64::from).collect()).unwrap();
        let mut plan = generate_mask(0, 2, 2, 0.0, 0).unwrap();
        plan.mask[3] = true;
        let out = apply_mask(&f, &plan, -1.0).unwrap();
        for c in 0..3 {
            assert_eq!(out.get(c, 1, 1), -1.0);
            assert_eq!(out.get(c, 0, 0), f.get(c, 0, 0));
        }
        let wrong = generate_mask(0, 3, 2, 0.0, 0).unwrap();
        assert!(apply_mask(&f, &wrong, 0.0).is_err());
    }

    #[test]
    fn mse_cases() {
        let t = map_2x2([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mse_loss(&t, &t).unwrap(), 0.0);
        assert_eq!(mse_loss(&map_2x2([0.0; 4]), &t).unwrap(), 7.5);
        let other = FeatureMap::zeros(0, 2, 2, 2);
        assert!(mse_loss(&other, &t).is_err());
    }

    #[test]
    fn total_loss_cases() {
        assert_eq!(total_loss(0.5, 1.5).unwrap().total, 2.0);
        assert_eq!(total_loss(0.0, 0.25).unwrap().total, 0.25);
        assert_eq!(total_loss(1e-9, 1e-9).unwrap().total, 2e-9);
        assert!(total_loss(-0.1, 1.0).is_err());
        assert!(total_loss(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn feature_map_validation() {
        assert!(FeatureMap::new(0, 0, 1, 1, vec![]).is_err());
        assert!(FeatureMap::new(0, 1, 1, 2, vec![1.0]).is_err());
        assert!(FeatureMap::new(0, 1, 1, 1, vec![f64::NAN]).is_err());
    }
}
