//! Wiring a [`RunConfig`] to the synthetic predictor and the training loop.

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::Result;
use crate::sim::SyntheticPredictor;
use crate::teach::Trainer;

pub type SimTrainer = Trainer<SyntheticPredictor>;

pub fn build_trainer(cfg: &RunConfig) -> Result<SimTrainer> {
    cfg.validate()?;
    let predictor = SyntheticPredictor::new(cfg.scenario.clone(), cfg.seed)?;
    let source = predictor.initial_params();
    Trainer::new(
        cfg.settings(),
        &cfg.scenario.class_ids(),
        source,
        cfg.scenario.last_level().channels,
        predictor,
    )
}

pub fn resume_trainer(ckpt: Checkpoint) -> Result<SimTrainer> {
    let predictor = SyntheticPredictor::new(ckpt.config.scenario.clone(), ckpt.config.seed)?;
    Trainer::from_state(ckpt.config.settings(), ckpt.state, predictor)
}

pub fn checkpoint_of(cfg: &RunConfig, trainer: &SimTrainer) -> Checkpoint {
    Checkpoint::new(cfg.clone(), trainer.state().clone())
}
