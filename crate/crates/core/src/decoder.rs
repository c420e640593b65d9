//! Two-layer per-position reconstruction decoder with analytic gradients.
//!
//! At every spatial position the channel vector `x` is mapped to
//! `w2 · relu(w1 · x + b1) + b2`. Output width equals input width, so the
//! decoder reconstructs the same level it reads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masking::{mse_loss, FeatureMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderParams {
    pub channels: usize,
    pub hidden_dim: usize,
    /// `hidden_dim × channels`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `channels × hidden_dim`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Hidden width used when none is configured: half the channel count, at least one.
pub fn default_hidden_dim(channels: usize) -> usize {
    (channels / 2).max(1)
}

impl DecoderParams {
    /// Uniform initialisation in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` per layer.
    pub fn init(channels: usize, hidden_dim: usize, seed: u64) -> Result<Self> {
        if channels == 0 || hidden_dim == 0 {
            return Err(Error::Input(format!(
                "decoder dimensions must be >= 1, got channels={channels} hidden={hidden_dim}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |n: usize, fan_in: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
        };
        let w1 = uniform(hidden_dim * channels, channels);
        let b1 = uniform(hidden_dim, channels);
        let w2 = uniform(channels * hidden_dim, hidden_dim);
        let b2 = uniform(channels, hidden_dim);
        Ok(Self {
            channels,
            hidden_dim,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn zeros(channels: usize, hidden_dim: usize) -> Self {
        Self {
            channels,
            hidden_dim,
            w1: vec![0.0; hidden_dim * channels],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; channels * hidden_dim],
            b2: vec![0.0; channels],
        }
    }

    fn check_input(&self, f: &FeatureMap) -> Result<()> {
        if f.channels != self.channels {
            return Err(Error::Input(format!(
                "decoder expects {} channels, feature map has {}",
                self.channels, f.channels
            )));
        }
        Ok(())
    }

    /// Hidden pre-activations and output for one position.
    fn position(&self, x: &[f64], pre: &mut [f64], out: &mut [f64]) {
        let (c, h) = (self.channels, self.hidden_dim);
        for j in 0..h {
            let row = &self.w1[j * c..(j + 1) * c];
            pre[j] = self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        for o in 0..c {
            let row = &self.w2[o * h..(o + 1) * h];
            out[o] = self.b2[o]
                + row
                    .iter()
                    .zip(pre.iter())
                    .map(|(w, &z)| w * z.max(0.0))
                    .sum::<f64>();
        }
    }

    pub fn forward(&self, masked: &FeatureMap) -> Result<FeatureMap> {
        self.check_input(masked)?;
        let plane = masked.plane();
        let c = self.channels;
        let mut out = FeatureMap::zeros(masked.level, c, masked.height, masked.width);
        let mut x = vec![0.0; c];
        let mut pre = vec![0.0; self.hidden_dim];
        let mut y = vec![0.0; c];
        for p in 0..plane {
            for ch in 0..c {
                x[ch] = masked.values[ch * plane + p];
            }
            self.position(&x, &mut pre, &mut y);
            for ch in 0..c {
                out.values[ch * plane + p] = y[ch];
            }
        }
        Ok(out)
    }

    /// Reconstruction MSE against `target` and its exact gradient.
    pub fn loss_and_grad(
        &self,
        masked: &FeatureMap,
        target: &FeatureMap,
    ) -> Result<(f64, DecoderGrads)> {
        self.check_input(masked)?;
        if !masked.same_shape(target) {
            return Err(Error::Input(
                "masked input and target must share a shape".to_string(),
            ));
        }
        let (c, h) = (self.channels, self.hidden_dim);
        let plane = masked.plane();
        let scale = 2.0 / (c * plane) as f64;

        let mut g = DecoderGrads {
            w1: vec![0.0; h * c],
            b1: vec![0.0; h],
            w2: vec![0.0; c * h],
            b2: vec![0.0; c],
        };
        let mut sq = 0.0;
        let mut x = vec![0.0; c];
        let mut pre = vec![0.0; h];
        let mut y = vec![0.0; c];
        let mut dy = vec![0.0; c];
        let mut dz = vec![0.0; h];

        for p in 0..plane {
            for ch in 0..c {
                x[ch] = masked.values[ch * plane + p];
            }
            self.position(&x, &mut pre, &mut y);
            for o in 0..c {
                let r = y[o] - target.values[o * plane + p];
                sq += r * r;
                dy[o] = scale * r;
                g.b2[o] += dy[o];
                for j in 0..h {
                    g.w2[o * h + j] += dy[o] * pre[j].max(0.0);
                }
            }
            for j in 0..h {
                dz[j] = if pre[j] > 0.0 {
                    (0..c).map(|o| self.w2[o * h + j] * dy[o]).sum()
                } else {
                    0.0
                };
                g.b1[j] += dz[j];
                for i in 0..c {
                    g.w1[j * c + i] += dz[j] * x[i];
                }
            }
        }
        Ok((sq / (c * plane) as f64, g))
    }

    pub fn loss(&self, masked: &FeatureMap, target: &FeatureMap) -> Result<f64> {
        mse_loss(&self.forward(masked)?, target)
    }

    pub fn sgd_step(&mut self, grads: &DecoderGrads, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Input(format!("learning rate must be > 0, got {lr}")));
        }
        let pairs = [
            (&mut self.w1, &grads.w1),
            (&mut self.b1, &grads.b1),
            (&mut self.w2, &grads.w2),
            (&mut self.b2, &grads.b2),
        ];
        for (p, g) in pairs {
            if p.len() != g.len() {
                return Err(Error::Input("gradient shape mismatch".to_string()));
            }
            for (pv, gv) in p.iter_mut().zip(g) {
                *pv -= lr * gv;
            }
        }
        Ok(())
    }
}
