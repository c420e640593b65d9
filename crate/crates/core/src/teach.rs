//! Mean-teacher orchestration.
//!
//! One iteration: the teacher predicts on the target batch, class thresholds
//! are updated from the teacher's confidences, pseudo-labels are filtered and
//! audited, the student takes a pseudo-label step and a masked reconstruction
//! step, the reconstruction loss drives the mask ratio, and the teacher
//! follows the student by EMA. Epoch boundaries recompute the step size and
//! apply scheduled selective retraining.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decoder::{default_hidden_dim, DecoderParams};
use crate::error::{Error, Result};
use crate::masking::{apply_mask, derive_seed, generate_mask, total_loss, FeatureMap};
use crate::pseudo::{filter, match_metrics, ClassId, ClassMetrics, Detection, GroundTruthBox};
use crate::schedule::{LossSource, SchedulerConfig, SchedulerState, UpdateCadence};
use crate::threshold::{smoothing_coefficient, ThresholdBank, VfstConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub backbone: Vec<f64>,
    pub encoder: Vec<f64>,
    pub other: Vec<f64>,
}

impl ParamVector {
    pub fn same_shape(&self, o: &ParamVector) -> bool {
        self.backbone.len() == o.backbone.len()
            && self.encoder.len() == o.encoder.len()
            && self.other.len() == o.other.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.backbone.iter().chain(&self.encoder).chain(&self.other)
    }

    pub fn max_abs_diff(&self, o: &ParamVector) -> f64 {
        self.iter()
            .zip(o.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherStudentState {
    pub teacher: ParamVector,
    pub student: ParamVector,
    /// Source-trained weights, never modified.
    pub source: ParamVector,
    pub momentum: f64,
    pub iter: u64,
    pub epoch: u64,
}

impl TeacherStudentState {
    pub fn new(source: ParamVector, momentum: f64) -> Result<Self> {
        if !(momentum > 0.0 && momentum < 1.0) {
            return Err(Error::config("loop.momentum", "must lie in (0, 1)"));
        }
        Ok(Self {
            teacher: source.clone(),
            student: source.clone(),
            source,
            momentum,
            iter: 0,
            epoch: 0,
        })
    }

    /// `teacher <- m * teacher + (1 - m) * student` over every segment.
    pub fn ema_update(&mut self) -> Result<()> {
        if !self.teacher.same_shape(&self.student) {
            return Err(Error::State("teacher and student shapes differ".to_string()));
        }
        let m = self.momentum;
        let blend = |t: &mut Vec<f64>, s: &Vec<f64>| {
            for (tv, sv) in t.iter_mut().zip(s) {
                *tv = m * *tv + (1.0 - m) * sv;
            }
        };
        blend(&mut self.teacher.backbone, &self.student.backbone);
        blend(&mut self.teacher.encoder, &self.student.encoder);
        blend(&mut self.teacher.other, &self.student.other);
        Ok(())
    }

    /// Restores the student's backbone and encoder from the source weights.
    pub fn srs_reset(&mut self, srs_epochs: &[u64]) -> Result<()> {
        if !srs_epochs.contains(&self.epoch) {
            return Err(Error::State(format!(
                "selective retraining not scheduled at epoch {}",
                self.epoch
            )));
        }
        if !self.student.same_shape(&self.source) {
            return Err(Error::State("student and source shapes differ".to_string()));
        }
        self.student.backbone.clone_from(&self.source.backbone);
        self.student.encoder.clone_from(&self.source.encoder);
        Ok(())
    }
}

/// Switches that remove one controller at a time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    /// Freeze the mask ratio at this value.
    pub fixed_mask_ratio: Option<f64>,
    /// Use this threshold for every class instead of the adaptive ones.
    pub fixed_threshold: Option<f64>,
    /// Pseudo-labels come from the student itself; no EMA teacher.
    pub no_teacher: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub total_epochs: u64,
    pub iters_per_epoch: u64,
    /// Epochs after which the student is reset; `None` means the midpoint epoch.
    pub srs_epochs: Option<Vec<u64>>,
    pub momentum: f64,
    pub decoder_lr: f64,
    /// Zero selects half the channel count of the reconstructed level.
    pub decoder_hidden: usize,
    pub mask_token: f64,
    pub iou_thr: f64,
    pub ablation: Ablation,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            total_epochs: 20,
            iters_per_epoch: 100,
            srs_epochs: None,
            momentum: 0.999,
            decoder_lr: 1e-2,
            decoder_hidden: 0,
            mask_token: 0.0,
            iou_thr: 0.5,
            ablation: Ablation::default(),
        }
    }
}

impl LoopConfig {
    pub fn total_iters(&self) -> u64 {
        self.total_epochs * self.iters_per_epoch
    }

    pub fn resolved_srs_epochs(&self) -> Vec<u64> {
        match &self.srs_epochs {
            Some(v) => v.clone(),
            None => vec![self.total_epochs.div_ceil(2)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_epochs < 1 {
            return Err(Error::config("loop.total_epochs", "must be >= 1"));
        }
        if let Some(bad) = self
            .resolved_srs_epochs()
            .into_iter()
            .find(|&e| e < 1 || e > self.total_epochs)
        {
            return Err(Error::config(
                "loop.srs_epochs",
                format!("epoch {bad} outside [1, {}]", self.total_epochs),
            ));
        }
        if !(self.momentum > 0.0 && self.momentum < 1.0) {
            return Err(Error::config("loop.momentum", "must lie in (0, 1)"));
        }
        if !(self.decoder_lr > 0.0 && self.decoder_lr.is_finite()) {
            return Err(Error::config("loop.decoder_lr", "must be > 0"));
        }
        if !self.mask_token.is_finite() {
            return Err(Error::config("loop.mask_token", "must be finite"));
        }
        if !(self.iou_thr > 0.0 && self.iou_thr < 1.0) {
            return Err(Error::config("loop.iou_thr", "must lie in (0, 1)"));
        }
        if let Some(mu) = self.ablation.fixed_mask_ratio {
            if !(0.0..=1.0).contains(&mu) {
                return Err(Error::config("loop.ablation.fixed_mask_ratio", "must lie in [0, 1]"));
            }
        }
        if let Some(n) = self.ablation.fixed_threshold {
            if !(0.0..=1.0).contains(&n) {
                return Err(Error::config("loop.ablation.fixed_threshold", "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Where the loop is when it calls the predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterContext {
    /// Zero-based global iteration index.
    pub iter: u64,
    /// One-based epoch.
    pub epoch: u64,
    /// `iter / total_iters`, in `[0, 1]`.
    pub run_fraction: f64,
}

/// What a predictor returns for one target batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetBatch {
    pub detections: Vec<Detection>,
    /// Reference boxes used to audit pseudo-label quality.
    pub ground_truth: Vec<GroundTruthBox>,
    pub tp_flags: Option<Vec<bool>>,
    /// Feature pyramid of the batch; the last level is reconstructed.
    pub pyramid: Vec<FeatureMap>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassFeedback {
    /// Teacher detections of this class before filtering.
    pub total: usize,
    pub kept_tp: usize,
    pub kept_fp: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudentFeedback {
    pub per_class: BTreeMap<ClassId, ClassFeedback>,
    pub mask_ratio: f64,
    pub l_mask: f64,
}

pub trait Predictor {
    /// Detections of a model with parameters `model` on the batch of `ctx.iter`.
    fn predict(&mut self, model: &ParamVector, ctx: &IterContext) -> Result<TargetBatch>;

    /// Student encoding of a masked feature map, fed to the reconstruction decoder.
    fn encode(&self, student: &ParamVector, masked: &FeatureMap, ctx: &IterContext) -> Result<FeatureMap>;

    /// One student update from curated pseudo-labels; returns the teaching loss.
    fn student_step(
        &mut self,
        student: &mut ParamVector,
        feedback: &StudentFeedback,
        ctx: &IterContext,
    ) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// One-based iteration number.
    pub iter: u64,
    pub epoch: u64,
    pub mu: f64,
    pub eta: f64,
    pub thresholds: BTreeMap<ClassId, f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub l_mask: f64,
    pub l_teach: f64,
    pub l_total: f64,
    pub class_counts: BTreeMap<ClassId, ClassCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub iter: u64,
    pub class_id: ClassId,
    pub mean: Option<f64>,
    pub var: Option<f64>,
    pub gamma: f64,
    pub n: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub rows: Vec<MetricsRow>,
    pub thresholds: Vec<ThresholdRow>,
}

impl MetricsLog {
    /// Per-class metrics pooled over every iteration of `epoch`.
    pub fn epoch_class_metrics(&self, epoch: u64) -> BTreeMap<ClassId, ClassMetrics> {
        let mut pooled: BTreeMap<ClassId, ClassCounts> = BTreeMap::new();
        for row in self.rows.iter().filter(|r| r.epoch == epoch) {
            for (&c, k) in &row.class_counts {
                let e = pooled.entry(c).or_default();
                e.tp += k.tp;
                e.fp += k.fp;
                e.fn_ += k.fn_;
            }
        }
        pooled
            .into_iter()
            .map(|(c, k)| (c, ClassMetrics::from_counts(k.tp, k.fp, k.fn_)))
            .collect()
    }

    pub fn epoch_macro_f1(&self, epoch: u64) -> f64 {
        let m = self.epoch_class_metrics(epoch);
        if m.is_empty() {
            0.0
        } else {
            m.values().map(|c| c.f1).sum::<f64>() / m.len() as f64
        }
    }

    pub fn last_epoch(&self) -> Option<u64> {
        self.rows.last().map(|r| r.epoch)
    }
}

/// Everything that evolves during a run. Serialises into checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub scheduler: SchedulerState,
    pub bank: ThresholdBank,
    pub models: TeacherStudentState,
    pub decoder: DecoderParams,
    /// Completed iterations.
    pub cursor: u64,
    /// Controller losses of the current epoch, for per-epoch cadence.
    pub epoch_losses: Vec<f64>,
    pub log: MetricsLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerSettings {
    pub scheduler: SchedulerConfig,
    pub vfst: VfstConfig,
    pub loop_cfg: LoopConfig,
    pub seed: u64,
}

impl TrainerSettings {
    pub fn validate(&self) -> Result<()> {
        self.scheduler.validate()?;
        self.vfst.validate()?;
        self.loop_cfg.validate()?;
        if self.scheduler.total_epochs != self.loop_cfg.total_epochs {
            return Err(Error::config(
                "scheduler.total_epochs",
                format!(
                    "must equal loop.total_epochs ({} != {})",
                    self.scheduler.total_epochs, self.loop_cfg.total_epochs
                ),
            ));
        }
        if self.vfst.total_iters != self.loop_cfg.total_iters() {
            return Err(Error::config(
                "vfst.total_iters",
                format!(
                    "must equal total_epochs * iters_per_epoch ({} != {})",
                    self.vfst.total_iters,
                    self.loop_cfg.total_iters()
                ),
            ));
        }
        Ok(())
    }
}

pub struct Trainer<P> {
    settings: TrainerSettings,
    state: RunState,
    predictor: P,
    srs_epochs: Vec<u64>,
}

impl<P: Predictor> Trainer<P> {
    pub fn new(
        settings: TrainerSettings,
        classes: &[ClassId],
        source: ParamVector,
        decoder_channels: usize,
        predictor: P,
    ) -> Result<Self> {
        settings.validate()?;
        let hidden = match settings.loop_cfg.decoder_hidden {
            0 => default_hidden_dim(decoder_channels),
            h => h,
        };
        let decoder = DecoderParams::init(decoder_channels, hidden, derive_seed(settings.seed, 0xdec, 0))?;
        let mut scheduler = SchedulerState::new(&settings.scheduler);
        if let Some(mu) = settings.loop_cfg.ablation.fixed_mask_ratio {
            scheduler.mu_t = mu;
        }
        let state = RunState {
            scheduler,
            bank: ThresholdBank::new(classes.iter().copied(), &settings.vfst),
            models: TeacherStudentState::new(source, settings.loop_cfg.momentum)?,
            decoder,
            cursor: 0,
            epoch_losses: Vec::new(),
            log: MetricsLog::default(),
        };
        Self::from_state(settings, state, predictor)
    }

    pub fn from_state(settings: TrainerSettings, state: RunState, predictor: P) -> Result<Self> {
        settings.validate()?;
        if state.cursor > settings.loop_cfg.total_iters() {
            return Err(Error::State(format!(
                "cursor {} beyond total iterations {}",
                state.cursor,
                settings.loop_cfg.total_iters()
            )));
        }
        let srs_epochs = settings.loop_cfg.resolved_srs_epochs();
        Ok(Self {
            settings,
            state,
            predictor,
            srs_epochs,
        })
    }

    pub fn settings(&self) -> &TrainerSettings {
        &self.settings
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub fn predictor(&self) -> &P {
        &self.predictor
    }

    pub fn into_state(self) -> RunState {
        self.state
    }

    pub fn is_finished(&self) -> bool {
        self.state.cursor >= self.settings.loop_cfg.total_iters()
    }

    /// Runs up to `target` completed iterations (clamped to the run length).
    pub fn run_until(&mut self, target: u64) -> Result<()> {
        let end = target.min(self.settings.loop_cfg.total_iters());
        while self.state.cursor < end {
            self.step()?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_until(u64::MAX)
    }

    fn active_thresholds(&self) -> BTreeMap<ClassId, f64> {
        match self.settings.loop_cfg.ablation.fixed_threshold {
            Some(n) => self.state.bank.states.keys().map(|&c| (c, n)).collect(),
            None => self.state.bank.thresholds(),
        }
    }

    /// One training iteration, including epoch-boundary work.
    pub fn step(&mut self) -> Result<()> {
        let lc = self.settings.loop_cfg.clone();
        let ipe = lc.iters_per_epoch;
        let total = lc.total_iters();
        if self.state.cursor >= total {
            return Err(Error::State("run already finished".to_string()));
        }
        let iter = self.state.cursor;
        let epoch = iter / ipe + 1;
        if iter % ipe == 0 {
            self.state.scheduler.advance_epoch(&self.settings.scheduler)?;
            self.state.models.epoch = epoch;
            self.state.epoch_losses.clear();
        }
        let ctx = IterContext {
            iter,
            epoch,
            run_fraction: iter as f64 / total as f64,
        };
        let wrap = |e: Error| match e {
            Error::Predictor { .. } => e,
            other => Error::Predictor {
                iter,
                message: other.to_string(),
            },
        };

        // 1. teacher inference
        let model = if lc.ablation.no_teacher {
            &self.state.models.student
        } else {
            &self.state.models.teacher
        };
        let batch = self.predictor.predict(model, &ctx).map_err(wrap)?;
        if batch.pyramid.is_empty() {
            return Err(Error::Predictor {
                iter,
                message: "empty feature pyramid".to_string(),
            });
        }

        // 2. thresholds
        let mut confidences: BTreeMap<ClassId, Vec<f64>> = BTreeMap::new();
        for d in &batch.detections {
            confidences.entry(d.class_id).or_default().push(d.score);
        }
        let vfst_iter = iter + 1;
        let round = if lc.ablation.fixed_threshold.is_some() {
            let gamma = smoothing_coefficient(vfst_iter, total, &self.settings.vfst)?;
            let stats = self
                .state
                .bank
                .states
                .keys()
                .map(|&c| {
                    let admitted: Vec<f64> = confidences
                        .get(&c)
                        .map(|v| v.iter().copied().filter(|&s| s >= self.settings.vfst.stats_floor).collect())
                        .unwrap_or_default();
                    (c, crate::threshold::class_stats(&admitted))
                })
                .collect();
            crate::threshold::VfstRound {
                iter: vfst_iter,
                gamma,
                stats,
            }
        } else {
            self.state
                .bank
                .update_all(&confidences, vfst_iter, &self.settings.vfst)?
        };
        let thresholds = self.active_thresholds();

        // 3. filter and audit
        let report = filter(&batch.detections, &thresholds)?;
        let audit = match_metrics(&report.kept, &batch.ground_truth, lc.iou_thr)?;
        let mut per_class: BTreeMap<ClassId, ClassFeedback> = BTreeMap::new();
        for &c in thresholds.keys() {
            per_class.insert(c, ClassFeedback::default());
        }
        for d in &batch.detections {
            per_class.entry(d.class_id).or_default().total += 1;
        }
        for (d, &hit) in report.kept.iter().zip(&audit.matched) {
            let e = per_class.entry(d.class_id).or_default();
            if hit {
                e.kept_tp += 1;
            } else {
                e.kept_fp += 1;
            }
        }
        let mut class_counts: BTreeMap<ClassId, ClassCounts> = BTreeMap::new();
        for &c in thresholds.keys() {
            let m = audit.per_class.get(&c).copied().unwrap_or_default();
            class_counts.insert(
                c,
                ClassCounts {
                    tp: m.tp,
                    fp: m.fp,
                    fn_: m.fn_,
                },
            );
        }
        let metrics: Vec<ClassMetrics> = class_counts
            .values()
            .map(|k| ClassMetrics::from_counts(k.tp, k.fp, k.fn_))
            .collect();
        let n_cls = metrics.len().max(1) as f64;
        let precision = metrics.iter().map(|m| m.precision).sum::<f64>() / n_cls;
        let recall = metrics.iter().map(|m| m.recall).sum::<f64>() / n_cls;
        let f1 = metrics.iter().map(|m| m.f1).sum::<f64>() / n_cls;

        // 4. masking and reconstruction on the last level
        let mu = self.state.scheduler.mu_t;
        let mut masked_last = None;
        for fmap in &batch.pyramid {
            let plan = generate_mask(
                fmap.level,
                fmap.height,
                fmap.width,
                mu,
                derive_seed(self.settings.seed, fmap.level, iter),
            )?;
            masked_last = Some(apply_mask(fmap, &plan, lc.mask_token)?);
        }
        let masked_last = masked_last.expect("non-empty pyramid");
        let target = batch.pyramid.last().expect("non-empty pyramid");
        let encoded = self
            .predictor
            .encode(&self.state.models.student, &masked_last, &ctx)
            .map_err(wrap)?;
        let (l_mask, grads) = self.state.decoder.loss_and_grad(&encoded, target)?;
        self.state.decoder.sgd_step(&grads, lc.decoder_lr)?;

        let feedback = StudentFeedback {
            per_class,
            mask_ratio: mu,
            l_mask,
        };
        let l_teach = self
            .predictor
            .student_step(&mut self.state.models.student, &feedback, &ctx)
            .map_err(wrap)?;
        let losses = total_loss(l_mask, l_teach).map_err(wrap)?;

        // 5. mask-ratio feedback
        let controller_loss = match self.settings.scheduler.loss_source {
            LossSource::Mask => losses.l_mask,
            LossSource::Total => losses.total,
        };
        let frozen = lc.ablation.fixed_mask_ratio.is_some();
        if !frozen && self.settings.scheduler.cadence == UpdateCadence::PerIteration {
            self.state
                .scheduler
                .update_mask_ratio(&self.settings.scheduler, controller_loss)?;
        }
        self.state.epoch_losses.push(controller_loss);

        // 6. teacher
        if lc.ablation.no_teacher {
            self.state.models.teacher = self.state.models.student.clone();
        } else {
            self.state.models.ema_update()?;
        }
        self.state.models.iter = iter + 1;

        for (&c, s) in &round.stats {
            self.state.log.thresholds.push(ThresholdRow {
                iter: vfst_iter,
                class_id: c,
                mean: s.map(|s| s.mean),
                var: s.map(|s| s.var),
                gamma: round.gamma,
                n: thresholds[&c],
            });
        }
        self.state.log.rows.push(MetricsRow {
            iter: iter + 1,
            epoch,
            mu,
            eta: self.state.scheduler.eta,
            thresholds,
            precision,
            recall,
            f1,
            l_mask: losses.l_mask,
            l_teach: losses.l_teach,
            l_total: losses.total,
            class_counts,
        });

        // epoch end
        if (iter + 1) % ipe == 0 {
            if !frozen && self.settings.scheduler.cadence == UpdateCadence::PerEpoch {
                let n = self.state.epoch_losses.len() as f64;
                let mean = self.state.epoch_losses.iter().sum::<f64>() / n;
                self.state
                    .scheduler
                    .update_mask_ratio(&self.settings.scheduler, mean)?;
            }
            if self.srs_epochs.contains(&epoch) {
                self.state.models.srs_reset(&self.srs_epochs)?;
            }
        }
        self.state.cursor = iter + 1;
        Ok(())
    }
}

/// Runs a full training loop from source weights and returns its log.
pub fn run_training<P: Predictor>(
    predictor: P,
    settings: TrainerSettings,
    classes: &[ClassId],
    source: ParamVector,
    decoder_channels: usize,
) -> Result<(MetricsLog, RunState)> {
    let mut trainer = Trainer::new(settings, classes, source, decoder_channels, predictor)?;
    trainer.run()?;
    let state = trainer.into_state();
    Ok((state.log.clone(), state))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(b: f64, e: f64, o: f64) -> ParamVector {
        ParamVector {
            backbone: vec![b; 3],
            encoder: vec![e; 2],
            other: vec![o; 2],
        }
    }

    #[test]
    fn ema_single_step() {
        let mut s = TeacherStudentState::new(pv(1.0, 1.0, 1.0), 0.9).unwrap();
        s.student = pv(0.0, 0.0, 0.0);
        s.ema_update().unwrap();
        assert!(s.teacher.iter().all(|&v| (v - 0.9).abs() < 1e-15));
    }

    #[test]
    fn ema_fixed_point() {
        let mut s = TeacherStudentState::new(pv(0.3, -2.0, 5.0), 0.999).unwrap();
        let before = s.teacher.clone();
        s.ema_update().unwrap();
        assert_eq!(s.teacher, before);
    }

    #[test]
    fn ema_shape_mismatch() {
        let mut s = TeacherStudentState::new(pv(0.0, 0.0, 0.0), 0.5).unwrap();
        s.student.other.push(1.0);
        assert!(matches!(s.ema_update(), Err(Error::State(_))));
    }

    #[test]
    fn srs_reset_restores_only_feature_segments() {
        let mut s = TeacherStudentState::new(pv(1.0, 2.0, 3.0), 0.99).unwrap();
        s.student = pv(7.0, 8.0, 9.0);
        s.teacher = pv(4.0, 5.0, 6.0);
        s.epoch = 5;
        s.srs_reset(&[5]).unwrap();
        assert_eq!(s.student.backbone, s.source.backbone);
        assert_eq!(s.student.encoder, s.source.encoder);
        assert_eq!(s.student.other, vec![9.0; 2]);
        assert_eq!(s.teacher, pv(4.0, 5.0, 6.0));
    }

    #[test]
    fn srs_outside_schedule_is_state_error() {
        let mut s = TeacherStudentState::new(pv(1.0, 2.0, 3.0), 0.99).unwrap();
        s.epoch = 4;
        assert!(matches!(s.srs_reset(&[5]), Err(Error::State(_))));
    }

    #[test]
    fn loop_config_defaults() {
        let lc = LoopConfig::default();
        assert_eq!(lc.resolved_srs_epochs(), vec![10]);
        let odd = LoopConfig {
            total_epochs: 7,
            ..Default::default()
        };
        assert_eq!(odd.resolved_srs_epochs(), vec![4]);
        let bad = LoopConfig {
            srs_epochs: Some(vec![0]),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
