//! Seeded synthetic self-training scenarios.
//!
//! A scenario describes class-imbalanced teacher detections whose confidence
//! distributions drift over the run, a calibrated correctness model
//! (`P(TP | score) = score^rho`), box geometry that makes true positives
//! overlap their ground truth and false positives overlap nothing, and a
//! feature pyramid for the masking path.
//!
//! [`SyntheticPredictor`] closes the loop: the teacher's parameters lift the
//! score distributions, and the student's parameters move according to the
//! curated pseudo-labels and the difficulty of the masked reconstruction.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masking::FeatureMap;
use crate::pseudo::{iou, BBox, ClassId, Detection, GroundTruthBox};
use crate::teach::{IterContext, ParamVector, Predictor, StudentFeedback, TargetBatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub id: ClassId,
    #[serde(default)]
    pub name: String,
    pub prevalence: f64,
    pub mean_start: f64,
    pub mean_end: f64,
    pub var_start: f64,
    pub var_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Side of the square cell each object occupies, in pixels.
    pub cell: f64,
    pub cols: usize,
    pub rows: usize,
    /// Side of a ground-truth box, centred in its cell.
    pub box_size: f64,
    /// Maximum per-axis offset of a detection from its cell-centred position.
    pub jitter: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            cell: 64.0,
            cols: 8,
            rows: 8,
            box_size: 48.0,
            jitter: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PyramidSpec {
    pub levels: Vec<LevelSpec>,
    /// Per-channel means are drawn from `[0.5, 0.5 + mean_spread]`.
    pub mean_spread: f64,
    pub noise_std: f64,
}

impl Default for PyramidSpec {
    fn default() -> Self {
        let level = |channels, side| LevelSpec {
            channels,
            height: side,
            width: side,
        };
        Self {
            levels: vec![level(4, 64), level(8, 48), level(16, 32)],
            mean_spread: 1.0,
            noise_std: 0.5,
        }
    }
}

/// Response of the synthetic student to its training signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningSpec {
    /// Length of the backbone and encoder segments each.
    pub param_dim: usize,
    /// Distance between source weights and the target-domain optimum.
    pub domain_gap: f64,
    /// Largest upward shift of a class's mean score, reached by a perfect teacher.
    pub lift: f64,
    /// Head learning rate per unit of pseudo-label signal.
    pub head_rate: f64,
    /// Backbone/encoder learning rate per unit of pseudo-label signal.
    pub feature_rate: f64,
    /// Backbone/encoder learning rate from reconstruction at the ideal mask ratio.
    pub recon_rate: f64,
    /// Weight of a kept false positive against a kept true positive.
    pub noise_penalty: f64,
    /// Random-walk scale injected per unit of false-positive fraction.
    pub noise_scale: f64,
    /// Ideal mask ratio for a student of zero and of full quality.
    pub sweet_spot_start: f64,
    pub sweet_spot_end: f64,
    pub sweet_spot_width: f64,
    /// Feature noise of the student encoder at zero quality.
    pub encoder_noise: f64,
}

impl Default for LearningSpec {
    fn default() -> Self {
        Self {
            param_dim: 8,
            domain_gap: 1.0,
            lift: 0.3,
            head_rate: 0.01,
            feature_rate: 0.01,
            recon_rate: 0.004,
            noise_penalty: 1.0,
            noise_scale: 0.005,
            sweet_spot_start: 0.3,
            sweet_spot_end: 0.8,
            sweet_spot_width: 0.2,
            encoder_noise: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub classes: Vec<ClassSpec>,
    /// Correctness exponent: a detection with score `s` is a true positive with probability `s^rho`.
    pub rho: f64,
    pub detections_per_iter: usize,
    pub images_per_iter: usize,
    pub grid: GridSpec,
    pub pyramid: PyramidSpec,
    pub learning: LearningSpec,
    /// Seeds the fixed structure of the scenario (channel means, target optimum).
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let class = |id, name: &str, prevalence, ms, me, vs, ve| ClassSpec {
            id: ClassId(id),
            name: name.to_string(),
            prevalence,
            mean_start: ms,
            mean_end: me,
            var_start: vs,
            var_end: ve,
        };
        Self {
            classes: vec![
                class(0, "car", 10.0, 0.45, 0.70, 0.045, 0.030),
                class(1, "truck", 2.0, 0.35, 0.60, 0.050, 0.040),
                class(2, "bus", 1.0, 0.30, 0.55, 0.050, 0.040),
            ],
            rho: 1.0,
            detections_per_iter: 120,
            images_per_iter: 4,
            grid: GridSpec::default(),
            pyramid: PyramidSpec::default(),
            learning: LearningSpec::default(),
            seed: 7,
        }
    }
}

impl ScenarioConfig {
    pub fn class_ids(&self) -> Vec<ClassId> {
        self.classes.iter().map(|c| c.id).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::config("scenario.classes", "must not be empty"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, c) in self.classes.iter().enumerate() {
            let field = |f: &str| format!("scenario.classes[{i}].{f}");
            if !seen.insert(c.id) {
                return Err(Error::config(field("id"), "duplicate class id"));
            }
            if !(c.prevalence > 0.0 && c.prevalence.is_finite()) {
                return Err(Error::config(field("prevalence"), "must be positive"));
            }
            for (name, m, v) in [
                ("mean_start", c.mean_start, c.var_start),
                ("mean_end", c.mean_end, c.var_end),
            ] {
                if !(m > 0.0 && m < 1.0) {
                    return Err(Error::config(field(name), "must lie in (0, 1)"));
                }
                if !(v >= 0.0) {
                    return Err(Error::config(field(name.replace("mean", "var").as_str()), "must be >= 0"));
                }
                if v >= m * (1.0 - m) {
                    return Err(Error::config(
                        field(name.replace("mean", "var").as_str()),
                        format!("infeasible beta moments: var {v} >= mean(1-mean) {}", m * (1.0 - m)),
                    ));
                }
            }
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::config("scenario.rho", "must be >= 0"));
        }
        if self.images_per_iter == 0 {
            return Err(Error::config("scenario.images_per_iter", "must be >= 1"));
        }
        let per_image = self.detections_per_iter.div_ceil(self.images_per_iter);
        let g = &self.grid;
        if per_image > g.cols * g.rows {
            return Err(Error::config(
                "scenario.grid",
                format!("{per_image} detections per image exceed {} cells", g.cols * g.rows),
            ));
        }
        if !(g.box_size > 0.0 && g.box_size <= g.cell) {
            return Err(Error::config("scenario.grid.box_size", "must lie in (0, cell]"));
        }
        if !(g.jitter >= 0.0 && 2.0 * g.jitter < g.cell - g.box_size) {
            return Err(Error::config(
                "scenario.grid.jitter",
                "must satisfy 0 <= 2*jitter < cell - box_size so boxes stay in their cell",
            ));
        }
        let inner = (g.box_size - g.jitter).powi(2);
        if inner / (2.0 * g.box_size * g.box_size - inner) < 0.7 {
            return Err(Error::config(
                "scenario.grid.jitter",
                "too large to keep true-positive IoU >= 0.7",
            ));
        }
        if self.pyramid.levels.is_empty() {
            return Err(Error::config("scenario.pyramid.levels", "must not be empty"));
        }
        if self
            .pyramid
            .levels
            .iter()
            .any(|l| l.channels == 0 || l.height == 0 || l.width == 0)
        {
            return Err(Error::config("scenario.pyramid.levels", "dimensions must be >= 1"));
        }
        if !(self.pyramid.noise_std >= 0.0) || !(self.pyramid.mean_spread >= 0.0) {
            return Err(Error::config("scenario.pyramid", "noise_std and mean_spread must be >= 0"));
        }
        let l = &self.learning;
        if l.param_dim == 0 {
            return Err(Error::config("scenario.learning.param_dim", "must be >= 1"));
        }
        if !(l.domain_gap > 0.0) {
            return Err(Error::config("scenario.learning.domain_gap", "must be > 0"));
        }
        if !(0.0..1.0).contains(&l.lift) {
            return Err(Error::config("scenario.learning.lift", "must lie in [0, 1)"));
        }
        if !(l.sweet_spot_width > 0.0) {
            return Err(Error::config("scenario.learning.sweet_spot_width", "must be > 0"));
        }
        Ok(())
    }

    pub fn last_level(&self) -> LevelSpec {
        *self.pyramid.levels.last().expect("validated non-empty")
    }
}

/// Class moments at a point of the run, linearly interpolated.
pub fn drifted_params(cfg: &ScenarioConfig, run_fraction: f64) -> Result<BTreeMap<ClassId, (f64, f64)>> {
    if !(0.0..=1.0).contains(&run_fraction) {
        return Err(Error::Domain(format!(
            "run fraction must lie in [0, 1], got {run_fraction}"
        )));
    }
    let lerp = |a: f64, b: f64| a + (b - a) * run_fraction;
    Ok(cfg
        .classes
        .iter()
        .map(|c| (c.id, (lerp(c.mean_start, c.mean_end), lerp(c.var_start, c.var_end))))
        .collect())
}

/// Beta shape parameters with the given mean and variance.
pub fn beta_from_moments(mean: f64, var: f64) -> Result<(f64, f64)> {
    if !(mean > 0.0 && mean < 1.0) || !(var > 0.0) || var >= mean * (1.0 - mean) {
        return Err(Error::config(
            "scenario.classes",
            format!("infeasible beta moments mean={mean} var={var}"),
        ));
    }
    let kappa = mean * (1.0 - mean) / var - 1.0;
    Ok((mean * kappa, (1.0 - mean) * kappa))
}

pub fn beta_moments(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (a / s, a * b / (s * s * (s + 1.0)))
}

/// Generator for one purpose at one iteration, independent of every other.
pub fn stream_rng(seed: u64, iter: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iter.wrapping_mul(8).wrapping_add(purpose));
    rng
}

pub(crate) const STREAM_DETECTIONS: u64 = 0;
pub(crate) const STREAM_FEATURES: u64 = 1;
pub(crate) const STREAM_ENCODER: u64 = 2;
pub(crate) const STREAM_STUDENT: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct IterationSample {
    pub detections: Vec<Detection>,
    /// Whether each detection is a true positive.
    pub tp_flags: Vec<bool>,
    pub ground_truth: Vec<GroundTruthBox>,
    pub pyramid: Vec<FeatureMap>,
}

/// Fixed per-channel means of every pyramid level, drawn from the scenario seed.
pub fn channel_means(cfg: &ScenarioConfig) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    cfg.pyramid
        .levels
        .iter()
        .map(|l| {
            (0..l.channels)
                .map(|_| 0.5 + cfg.pyramid.mean_spread * rng.random::<f64>())
                .collect()
        })
        .collect()
}

/// Feature pyramid: fixed channel means plus fresh Gaussian noise.
pub fn generate_pyramid(cfg: &ScenarioConfig, means: &[Vec<f64>], rng: &mut impl Rng) -> Vec<FeatureMap> {
    cfg.pyramid
        .levels
        .iter()
        .zip(means)
        .enumerate()
        .map(|(level, (spec, mu))| {
            let plane = spec.height * spec.width;
            let mut values = Vec::with_capacity(spec.channels * plane);
            for m in mu {
                for _ in 0..plane {
                    let z: f64 = rng.sample(StandardNormal);
                    values.push(m + cfg.pyramid.noise_std * z);
                }
            }
            FeatureMap {
                level,
                channels: spec.channels,
                height: spec.height,
                width: spec.width,
                values,
            }
        })
        .collect()
}

/// Detections and ground truth for one iteration under the given class moments.
pub fn generate_detections(
    cfg: &ScenarioConfig,
    iter: u64,
    moments: &BTreeMap<ClassId, (f64, f64)>,
    rng: &mut impl Rng,
) -> Result<(Vec<Detection>, Vec<bool>, Vec<GroundTruthBox>)> {
    let weights: Vec<f64> = cfg.classes.iter().map(|c| c.prevalence).collect();
    let picker = WeightedIndex::new(&weights)
        .map_err(|e| Error::config("scenario.classes", format!("prevalence: {e}")))?;
    let mut samplers = Vec::with_capacity(cfg.classes.len());
    for c in &cfg.classes {
        let (m, v) = *moments
            .get(&c.id)
            .ok_or_else(|| Error::Input(format!("no moments for class {}", c.id)))?;
        let sampler = if v == 0.0 {
            ScoreSampler::Constant(m)
        } else {
            let (a, b) = beta_from_moments(m, v)?;
            ScoreSampler::Beta(
                Beta::new(a, b).map_err(|e| Error::config("scenario.classes", e.to_string()))?,
            )
        };
        samplers.push(sampler);
    }

    let g = &cfg.grid;
    let margin = (g.cell - g.box_size) / 2.0;
    let n = cfg.detections_per_iter;
    let mut dets = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    let mut gt = Vec::new();
    for i in 0..n {
        let ci = picker.sample(rng);
        let score = samplers[ci].sample(rng).clamp(0.0, 1.0);
        let tp = rng.random::<f64>() < score.powf(cfg.rho);
        let image_id = iter * cfg.images_per_iter as u64 + (i % cfg.images_per_iter) as u64;
        let cell = i / cfg.images_per_iter;
        let ox = (cell % g.cols) as f64 * g.cell + margin;
        let oy = (cell / g.cols) as f64 * g.cell + margin;
        let dx = if g.jitter > 0.0 { rng.random_range(-g.jitter..=g.jitter) } else { 0.0 };
        let dy = if g.jitter > 0.0 { rng.random_range(-g.jitter..=g.jitter) } else { 0.0 };
        let class_id = cfg.classes[ci].id;
        if tp {
            gt.push(GroundTruthBox {
                image_id,
                class_id,
                bbox: BBox { x: ox, y: oy, w: g.box_size, h: g.box_size },
            });
        }
        dets.push(Detection {
            image_id,
            class_id,
            score,
            bbox: BBox { x: ox + dx, y: oy + dy, w: g.box_size, h: g.box_size },
        });
        flags.push(tp);
    }
    Ok((dets, flags, gt))
}

enum ScoreSampler {
    Constant(f64),
    Beta(Beta<f64>),
}

impl ScoreSampler {
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            ScoreSampler::Constant(m) => *m,
            ScoreSampler::Beta(b) => b.sample(rng),
        }
    }
}

/// Scenario baseline for iteration `iter` of `total_iters`, with no teacher lift.
pub fn generate_iteration(
    cfg: &ScenarioConfig,
    iter: u64,
    total_iters: u64,
    seed: u64,
) -> Result<IterationSample> {
    let frac = if total_iters == 0 { 0.0 } else { (iter as f64 / total_iters as f64).min(1.0) };
    let moments = drifted_params(cfg, frac)?;
    let mut rng = stream_rng(seed, iter, STREAM_DETECTIONS);
    let (detections, tp_flags, ground_truth) = generate_detections(cfg, iter, &moments, &mut rng)?;
    let mut frng = stream_rng(seed, iter, STREAM_FEATURES);
    let pyramid = generate_pyramid(cfg, &channel_means(cfg), &mut frng);
    Ok(IterationSample {
        detections,
        tp_flags,
        ground_truth,
        pyramid,
    })
}

/// Closed-loop stand-in for a detector.
///
/// Backbone and encoder segments live in a space with a hidden target-domain
/// optimum; the source weights sit `domain_gap` away from it. A parameter
/// vector's quality is one minus its normalised distance to the optimum. The
/// `other` segment carries one head skill per class. Teacher quality and head
/// skill lift the class mean scores; student quality shrinks encoder noise.
#[derive(Debug, Clone)]
pub struct SyntheticPredictor {
    scenario: ScenarioConfig,
    seed: u64,
    optimum: Vec<f64>,
    source: Vec<f64>,
    channel_means: Vec<Vec<f64>>,
}

impl SyntheticPredictor {
    pub fn new(scenario: ScenarioConfig, seed: u64) -> Result<Self> {
        scenario.validate()?;
        let d = 2 * scenario.learning.param_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        let optimum: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let source = optimum
            .iter()
            .zip(&dir)
            .map(|(o, v)| o + scenario.learning.domain_gap * v / norm)
            .collect();
        let channel_means = channel_means(&scenario);
        Ok(Self {
            scenario,
            seed,
            optimum,
            source,
            channel_means,
        })
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    /// Source-trained weights: the starting point of teacher and student.
    pub fn initial_params(&self) -> ParamVector {
        let d = self.scenario.learning.param_dim;
        ParamVector {
            backbone: self.source[..d].to_vec(),
            encoder: self.source[d..].to_vec(),
            other: vec![0.0; self.scenario.classes.len()],
        }
    }

    pub fn quality(&self, p: &ParamVector) -> f64 {
        let dist = p
            .backbone
            .iter()
            .chain(&p.encoder)
            .zip(&self.optimum)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        (1.0 - dist / self.scenario.learning.domain_gap).clamp(0.0, 1.0)
    }

    fn skill(p: &ParamVector, idx: usize) -> f64 {
        p.other.get(idx).copied().unwrap_or(0.0).clamp(0.0, 1.0)
    }

    /// Class moments seen through a model with parameters `p`.
    pub fn lifted_moments(&self, p: &ParamVector, run_fraction: f64) -> Result<BTreeMap<ClassId, (f64, f64)>> {
        let base = drifted_params(&self.scenario, run_fraction)?;
        let q = self.quality(p);
        let lift = self.scenario.learning.lift;
        Ok(self
            .scenario
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (m, v) = base[&c.id];
                let competence = 0.5 * q + 0.5 * Self::skill(p, i);
                let m = m + lift * competence * (1.0 - m);
                (c.id, (m, v.min(0.8 * m * (1.0 - m))))
            })
            .collect())
    }

    /// Most useful mask ratio for a student of quality `q`, and the benefit at `mu`.
    pub fn reconstruction_benefit(&self, q: f64, mu: f64) -> f64 {
        let l = &self.scenario.learning;
        let ideal = l.sweet_spot_start + (l.sweet_spot_end - l.sweet_spot_start) * q;
        let z = (mu - ideal) / l.sweet_spot_width;
        (-z * z).exp()
    }
}

impl Predictor for SyntheticPredictor {
    fn predict(&mut self, model: &ParamVector, ctx: &IterContext) -> Result<TargetBatch> {
        let moments = self.lifted_moments(model, ctx.run_fraction)?;
        let mut rng = stream_rng(self.seed, ctx.iter, STREAM_DETECTIONS);
        let (detections, tp_flags, ground_truth) =
            generate_detections(&self.scenario, ctx.iter, &moments, &mut rng)?;
        let mut frng = stream_rng(self.seed, ctx.iter, STREAM_FEATURES);
        let pyramid = generate_pyramid(&self.scenario, &self.channel_means, &mut frng);
        Ok(TargetBatch {
            detections,
            ground_truth,
            tp_flags: Some(tp_flags),
            pyramid,
        })
    }

    fn encode(&self, student: &ParamVector, masked: &FeatureMap, ctx: &IterContext) -> Result<FeatureMap> {
        let sigma = self.scenario.learning.encoder_noise * (1.0 - self.quality(student));
        let mut out = masked.clone();
        if sigma > 0.0 {
            let mut rng = stream_rng(self.seed, ctx.iter, STREAM_ENCODER);
            for v in &mut out.values {
                let z: f64 = rng.sample(StandardNormal);
                *v += sigma * z;
            }
        }
        Ok(out)
    }

    fn student_step(
        &mut self,
        student: &mut ParamVector,
        feedback: &StudentFeedback,
        ctx: &IterContext,
    ) -> Result<f64> {
        let l = self.scenario.learning.clone();
        let mut total_signal = 0.0;
        let mut total_n = 0usize;
        let mut kept_fp = 0usize;
        let mut kept = 0usize;
        for (i, c) in self.scenario.classes.iter().enumerate() {
            let counts = feedback.per_class.get(&c.id).copied().unwrap_or_default();
            let signal = counts.kept_tp as f64 - l.noise_penalty * counts.kept_fp as f64;
            if counts.total > 0 {
                let s = &mut student.other[i];
                *s = (*s + l.head_rate * signal / counts.total as f64).clamp(0.0, 1.0);
            }
            total_signal += signal;
            total_n += counts.total;
            kept_fp += counts.kept_fp;
            kept += counts.kept_tp + counts.kept_fp;
        }
        let pl_signal = if total_n > 0 { (total_signal / total_n as f64).max(0.0) } else { 0.0 };
        let fp_frac = if kept > 0 { kept_fp as f64 / kept as f64 } else { 0.0 };

        let q = self.quality(student);
        let benefit = self.reconstruction_benefit(q, feedback.mask_ratio);
        let pull = l.feature_rate * pl_signal + l.recon_rate * benefit;
        let mut rng = stream_rng(self.seed, ctx.iter, STREAM_STUDENT);
        let d = l.param_dim;
        for (k, target) in self.optimum.iter().enumerate() {
            let p = if k < d { &mut student.backbone[k] } else { &mut student.encoder[k - d] };
            let z: f64 = rng.sample(StandardNormal);
            *p += pull * (target - *p) + l.noise_scale * fp_frac * z;
        }
        Ok(fp_frac + (1.0 - self.quality(student)))
    }
}

/// Fraction of true positives whose box reaches `thr` IoU against a ground-truth box.
pub fn tp_overlap_fraction(sample: &IterationSample, thr: f64) -> f64 {
    let tps: Vec<&Detection> = sample
        .detections
        .iter()
        .zip(&sample.tp_flags)
        .filter(|(_, &f)| f)
        .map(|(d, _)| d)
        .collect();
    if tps.is_empty() {
        return 1.0;
    }
    let ok = tps
        .iter()
        .filter(|d| {
            sample
                .ground_truth
                .iter()
                .any(|g| g.image_id == d.image_id && iou(&g.bbox, &d.bbox) >= thr)
        })
        .count();
    ok as f64 / tps.len() as f64
}
