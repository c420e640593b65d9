//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls into the code it checks, except to
//! build inputs.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use teachctl_core::masking::derive_seed;
use teachctl_core::{apply_mask, generate_mask, BBox, DecoderParams, FeatureMap};

/// Logistic function written through `tanh` so it shares no code path with
/// the library's `1 / (1 + exp(-z))`.
pub fn sigmoid(z: f64) -> f64 {
    0.5 * (1.0 + (0.5 * z).tanh())
}

/// Mask-ratio controller, transcribed straight from its pseudocode with the
/// default constants: one epoch per loss value, T = number of losses.
/// Returns `(eta, mu)` after every epoch.
pub fn controller_replay(losses: &[f64]) -> Vec<(f64, f64)> {
    let (eta_min, eta_max, k, mid) = (0.01, 0.02, 10.0, 0.5);
    let (lo, hi) = (0.1, 0.9);
    let total = losses.len() as f64;
    let mut mu: f64 = 0.5;
    let mut history: Vec<f64> = Vec::new();
    let mut out = Vec::with_capacity(losses.len());
    for (t, &l) in losses.iter().enumerate() {
        let x = (t + 1) as f64 / total;
        let eta = eta_min + (eta_max - eta_min) * (1.0 - sigmoid(k * (x - mid)));
        let l_mean = if history.len() < 3 {
            l
        } else {
            let n = history.len();
            (history[n - 3] + history[n - 2] + history[n - 1]) / 3.0
        };
        if l >= l_mean {
            mu -= eta;
        } else {
            mu += eta;
        }
        mu = mu.max(lo).min(hi);
        history.push(l);
        out.push((eta, mu));
    }
    out
}

/// Mean and population variance in two passes.
pub fn two_pass_stats(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Per-class threshold trajectory with default constants and the
/// progress-decaying smoothing coefficient. `batches[i]` is fed as
/// iteration `i + 1` of `total_iters`.
pub fn threshold_replay(
    classes: &[u32],
    batches: &[BTreeMap<u32, Vec<f64>>],
    total_iters: u64,
) -> Vec<BTreeMap<u32, f64>> {
    let (alpha_dt, beta, lo, hi, alpha_at, floor) = (0.5, 0.2, 0.25, 0.45, 10.0, 0.05);
    let mut n: BTreeMap<u32, f64> = classes.iter().map(|&c| (c, 0.3)).collect();
    let mut out = Vec::new();
    for (i, batch) in batches.iter().enumerate() {
        let x = (i + 1) as f64 / total_iters as f64;
        let gamma = sigmoid(-alpha_at * (x - 0.5));
        for &c in classes {
            let admitted: Vec<f64> = batch
                .get(&c)
                .map(|v| v.iter().copied().filter(|&s| s >= floor).collect())
                .unwrap_or_default();
            if admitted.is_empty() {
                continue;
            }
            let (mean, var) = two_pass_stats(&admitted);
            let target = alpha_dt * mean.sqrt() - beta * var;
            let blended = gamma * n[&c] + (1.0 - gamma) * target;
            n.insert(c, blended.max(lo).min(hi));
        }
        out.push(n.clone());
    }
    out
}

fn overlap(a: &BBox, b: &BBox) -> f64 {
    let x0 = a.x.max(b.x);
    let y0 = a.y.max(b.y);
    let x1 = (a.x + a.w).min(b.x + b.w);
    let y1 = (a.y + a.h).min(b.y + b.h);
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let inter = (x1 - x0) * (y1 - y0);
    inter / (a.w * a.h + b.w * b.h - inter)
}

/// Exhaustive assignment for one (image, class) group: over every injective
/// partial matching with IoU >= `thr`, take the one whose per-detection IoU
/// vector (detections by descending score, ties by index, unmatched = -1)
/// is lexicographically largest. Returns its number of matches.
pub fn exhaustive_matches(dets: &[(f64, BBox)], gts: &[BBox], thr: f64) -> usize {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].0.total_cmp(&dets[a].0).then(a.cmp(&b)));

    fn search(
        k: usize,
        order: &[usize],
        dets: &[(f64, BBox)],
        gts: &[BBox],
        thr: f64,
        used: &mut Vec<bool>,
        current: &mut Vec<f64>,
        best: &mut Option<Vec<f64>>,
    ) {
        if k == order.len() {
            let better = match best {
                None => true,
                Some(b) => current.iter().zip(b.iter()).find(|(c, b)| c != b).is_some_and(|(c, b)| c > b),
            };
            if better {
                *best = Some(current.clone());
            }
            return;
        }
        current.push(-1.0);
        search(k + 1, order, dets, gts, thr, used, current, best);
        current.pop();
        for g in 0..gts.len() {
            if used[g] {
                continue;
            }
            let v = overlap(&dets[order[k]].1, &gts[g]);
            if v >= thr {
                used[g] = true;
                current.push(v);
                search(k + 1, order, dets, gts, thr, used, current, best);
                current.pop();
                used[g] = false;
            }
        }
    }

    let mut best = None;
    search(0, &order, dets, gts, thr, &mut vec![false; gts.len()], &mut Vec::new(), &mut best);
    best.map_or(0, |b| b.iter().filter(|&&v| v >= 0.0).count())
}

/// Decoder output computed with explicit weight matrices, one position at a time.
pub fn decoder_forward(p: &DecoderParams, input: &FeatureMap) -> Vec<f64> {
    let (c, h) = (p.channels, p.hidden_dim);
    let w1: Vec<Vec<f64>> = (0..h).map(|j| p.w1[j * c..(j + 1) * c].to_vec()).collect();
    let w2: Vec<Vec<f64>> = (0..c).map(|o| p.w2[o * h..(o + 1) * h].to_vec()).collect();
    let plane = input.height * input.width;
    let mut out = vec![0.0; c * plane];
    for y in 0..input.height {
        for x in 0..input.width {
            let v: Vec<f64> = (0..c).map(|ch| input.get(ch, y, x)).collect();
            let hidden: Vec<f64> = (0..h)
                .map(|j| {
                    let mut z = p.b1[j];
                    for i in 0..c {
                        z += w1[j][i] * v[i];
                    }
                    if z > 0.0 { z } else { 0.0 }
                })
                .collect();
            for o in 0..c {
                let mut s = p.b2[o];
                for j in 0..h {
                    s += w2[o][j] * hidden[j];
                }
                out[o * plane + y * input.width + x] = s;
            }
        }
    }
    out
}

/// Gaussian feature map with per-channel offsets.
pub fn random_map(seed: u64, channels: usize, h: usize, w: usize) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(channels * h * w);
    for c in 0..channels {
        let mean = 0.5 + c as f64 / channels as f64;
        for _ in 0..h * w {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            values.push(mean + 0.5 * z);
        }
    }
    FeatureMap::new(0, channels, h, w, values).unwrap()
}

/// The fixed reconstruction fixture: 16 channels on an 8×8 grid.
pub fn reconstruction_target() -> FeatureMap {
    random_map(11, 16, 8, 8)
}

/// Trains a freshly initialised decoder for `steps` SGD steps at `lr` and
/// returns `(initial loss, final loss)`. With `mask_ratio` the input is the
/// target with that fraction of positions replaced by zero.
pub fn train_decoder(mask_ratio: Option<f64>, steps: usize, lr: f64) -> (f64, f64) {
    let target = reconstruction_target();
    let input = match mask_ratio {
        Some(mu) => {
            let plan = generate_mask(0, 8, 8, mu, derive_seed(11, 0, 0)).unwrap();
            apply_mask(&target, &plan, 0.0).unwrap()
        }
        None => target.clone(),
    };
    let mut dec = DecoderParams::init(16, 8, 11).unwrap();
    let initial = dec.loss(&input, &target).unwrap();
    for _ in 0..steps {
        let (_, g) = dec.loss_and_grad(&input, &target).unwrap();
        dec.sgd_step(&g, lr).unwrap();
    }
    (initial, dec.loss(&input, &target).unwrap())
}

/// Largest relative error between analytic and central-difference gradients
/// over every decoder parameter, for one seeded instance.
pub fn gradient_check(seed: u64, step: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = rng.random_range(2..=8usize);
    let hidden = rng.random_range(1..=channels);
    let (h, w) = (rng.random_range(1..=5usize), rng.random_range(1..=5usize));
    let input = random_map(seed.wrapping_mul(3) + 1, channels, h, w);
    let target = random_map(seed.wrapping_mul(3) + 2, channels, h, w);
    let params = DecoderParams::init(channels, hidden, seed).unwrap();
    let (_, grads) = params.loss_and_grad(&input, &target).unwrap();

    let mut worst: f64 = 0.0;
    let analytic = [&grads.w1, &grads.b1, &grads.w2, &grads.b2];
    for (which, g) in analytic.iter().enumerate() {
        for i in 0..g.len() {
            let eval = |delta: f64| {
                let mut p = params.clone();
                let slot = match which {
                    0 => &mut p.w1[i],
                    1 => &mut p.b1[i],
                    2 => &mut p.w2[i],
                    _ => &mut p.b2[i],
                };
                *slot += delta;
                p.loss(&input, &target).unwrap()
            };
            let numeric = (eval(step) - eval(-step)) / (2.0 * step);
            let a = g[i];
            let scale = a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    worst
}
