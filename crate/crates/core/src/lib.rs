//! Feedback controllers for teacher-student self-training.
//!
//! * [`schedule`]: loss-feedback mask-ratio controller with a logistic step schedule.
//! * [`masking`] and [`decoder`]: exact-count spatial masking and a small
//!   reconstruction decoder trained on the masked features.
//! * [`threshold`]: per-class pseudo-label thresholds from confidence mean and variance.
//! * [`pseudo`]: detection filtering and pseudo-label quality metrics.
//! * [`teach`]: EMA teacher, selective retraining and the training loop.
//! * [`sim`]: seeded synthetic scenarios and a closed-loop predictor.
//! * [`handles`]: standalone controller handles with JSON state export and import.
//! * [`config`], [`checkpoint`], [`report`], [`coco`]: persistence and reporting.

pub mod checkpoint;
pub mod coco;
pub mod config;
pub mod decoder;
pub mod error;
pub mod handles;
pub mod masking;
pub mod pseudo;
pub mod report;
pub mod run;
pub mod schedule;
pub mod sim;
pub mod teach;
pub mod threshold;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, SCHEMA_VERSION};
pub use config::RunConfig;
pub use decoder::{DecoderGrads, DecoderParams};
pub use error::{Error, Result};
pub use handles::{SchedulerHandle, VfstHandle};
pub use masking::{apply_mask, generate_mask, mse_loss, total_loss, FeatureMap, LossPair, MaskPlan};
pub use pseudo::{
    filter, iou, match_metrics, BBox, ClassId, ClassMetrics, Detection, FilterReport,
    GroundTruthBox, MatchReport,
};
pub use schedule::{step_size, synthetic_losses, LossSource, SchedulerConfig, SchedulerState, UpdateCadence};
pub use sim::{ScenarioConfig, SyntheticPredictor};
pub use teach::{
    Ablation, LoopConfig, MetricsLog, ParamVector, Predictor, RunState, TeacherStudentState,
    Trainer, TrainerSettings,
};
pub use threshold::{
    class_stats, smoothing_coefficient, update_threshold, ClassThresholdState, GammaMode,
    ThresholdBank, VfstConfig,
};
