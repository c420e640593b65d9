//! Inputs shared by the criterion benches.

use std::collections::BTreeMap;

use teachctl_core::sim::generate_iteration;
use teachctl_core::{ClassId, Detection, FeatureMap, GroundTruthBox, RunConfig, ScenarioConfig};

/// One iteration of the default scenario: detections, ground truth and the
/// last pyramid level.
pub fn scene(iter: u64) -> (Vec<Detection>, Vec<GroundTruthBox>, FeatureMap) {
    let s = generate_iteration(&ScenarioConfig::default(), iter, 2000, 1).expect("default scenario is valid");
    let last = s.pyramid.last().expect("non-empty pyramid").clone();
    (s.detections, s.ground_truth, last)
}

pub fn class_ids() -> Vec<ClassId> {
    ScenarioConfig::default().class_ids()
}

/// Per-class confidence lists for one threshold round.
pub fn confidence_batch(iter: u64) -> BTreeMap<ClassId, Vec<f64>> {
    let (dets, _, _) = scene(iter);
    let mut batch: BTreeMap<ClassId, Vec<f64>> = BTreeMap::new();
    for d in dets {
        batch.entry(d.class_id).or_default().push(d.score);
    }
    batch
}

/// Default configuration shortened to `iters` iterations in a single epoch.
pub fn short_run(iters: u64) -> RunConfig {
    RunConfig::from_json_str(&format!(
        r#"{{"loop": {{"total_epochs": 1, "iters_per_epoch": {iters}}}}}"#
    ))
    .expect("valid short config")
}
