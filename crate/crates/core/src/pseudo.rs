//! Detections, threshold filtering and pseudo-label quality metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u32);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Axis-aligned box as `(x, y, w, h)` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) {
            return Err(Error::Input("bbox values must be finite".to_string()));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::Input(format!(
                "bbox extent must be positive, got w={} h={}",
                self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let iy = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: u64,
    pub class_id: ClassId,
    pub score: f64,
    pub bbox: BBox,
}

impl Detection {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::Input(format!(
                "detection score must lie in [0, 1], got {}",
                self.score
            )));
        }
        self.bbox.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub image_id: u64,
    pub class_id: ClassId,
    pub bbox: BBox,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeepCounts {
    pub kept: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub kept: Vec<Detection>,
    /// Positions of `kept` entries in the input slice.
    pub kept_indices: Vec<usize>,
    pub counts: BTreeMap<ClassId, KeepCounts>,
    pub thresholds: BTreeMap<ClassId, f64>,
}

/// Keeps detections scoring at or above their class threshold, in input order.
pub fn filter(dets: &[Detection], thresholds: &BTreeMap<ClassId, f64>) -> Result<FilterReport> {
    let mut counts: BTreeMap<ClassId, KeepCounts> = BTreeMap::new();
    let mut kept = Vec::new();
    let mut kept_indices = Vec::new();
    for (i, d) in dets.iter().enumerate() {
        let n = *thresholds.get(&d.class_id).ok_or_else(|| {
            Error::Input(format!(
                "no threshold for class {} (detection {i})",
                d.class_id
            ))
        })?;
        let entry = counts.entry(d.class_id).or_default();
        if d.score >= n {
            entry.kept += 1;
            kept.push(d.clone());
            kept_indices.push(i);
        } else {
            entry.dropped += 1;
        }
    }
    Ok(FilterReport {
        kept,
        kept_indices,
        counts,
        thresholds: thresholds.clone(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub per_class: BTreeMap<ClassId, ClassMetrics>,
    /// For every input detection, whether it was matched to a ground-truth box.
    pub matched: Vec<bool>,
}

impl MatchReport {
    pub fn macro_f1(&self) -> f64 {
        macro_average(self.per_class.values().map(|m| m.f1))
    }
    pub fn macro_precision(&self) -> f64 {
        macro_average(self.per_class.values().map(|m| m.precision))
    }
    pub fn macro_recall(&self) -> f64 {
        macro_average(self.per_class.values().map(|m| m.recall))
    }
}

fn macro_average(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Greedy matching per (image, class): detections in descending score order
/// each claim the unmatched ground-truth box of highest IoU, if that IoU
/// reaches `iou_thr`. Ties keep input order.
pub fn match_metrics(
    pseudo: &[Detection],
    gt: &[GroundTruthBox],
    iou_thr: f64,
) -> Result<MatchReport> {
    if !(iou_thr > 0.0 && iou_thr < 1.0) {
        return Err(Error::Domain(format!(
            "iou threshold must lie in (0, 1), got {iou_thr}"
        )));
    }
    let mut det_groups: BTreeMap<(u64, ClassId), Vec<usize>> = BTreeMap::new();
    for (i, d) in pseudo.iter().enumerate() {
        det_groups.entry((d.image_id, d.class_id)).or_default().push(i);
    }
    let mut gt_groups: BTreeMap<(u64, ClassId), Vec<usize>> = BTreeMap::new();
    for (i, g) in gt.iter().enumerate() {
        gt_groups.entry((g.image_id, g.class_id)).or_default().push(i);
    }

    let mut matched = vec![false; pseudo.len()];
    let mut tp: BTreeMap<ClassId, usize> = BTreeMap::new();
    for (key, dets) in &det_groups {
        let Some(gts) = gt_groups.get(key) else {
            continue;
        };
        let mut order = dets.clone();
        order.sort_by(|&a, &b| pseudo[b].score.total_cmp(&pseudo[a].score));
        let mut taken = vec![false; gts.len()];
        for di in order {
            let mut best: Option<(usize, f64)> = None;
            for (gj, &gi) in gts.iter().enumerate() {
                if taken[gj] {
                    continue;
                }
                let v = iou(&pseudo[di].bbox, &gt[gi].bbox);
                if v >= iou_thr && best.is_none_or(|(_, b)| v > b) {
                    best = Some((gj, v));
                }
            }
            if let Some((gj, _)) = best {
                taken[gj] = true;
                matched[di] = true;
                *tp.entry(key.1).or_default() += 1;
            }
        }
    }

    let classes: BTreeSet<ClassId> = pseudo
        .iter()
        .map(|d| d.class_id)
        .chain(gt.iter().map(|g| g.class_id))
        .collect();
    let per_class = classes
        .into_iter()
        .map(|c| {
            let t = tp.get(&c).copied().unwrap_or(0);
            let n_det = pseudo.iter().filter(|d| d.class_id == c).count();
            let n_gt = gt.iter().filter(|g| g.class_id == c).count();
            (c, ClassMetrics::from_counts(t, n_det - t, n_gt - t))
        })
        .collect();
    Ok(MatchReport { per_class, matched })
}
