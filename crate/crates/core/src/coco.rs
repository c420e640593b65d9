//! COCO results-format ingestion and offline pseudo-label filtering.
//!
//! Results are a JSON array of `{"image_id", "category_id", "bbox": [x, y, w, h], "score"}`.
//! Ground truth is either such an array without scores or an object with an
//! `"annotations"` array. Kept records are emitted verbatim, extra fields included.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::pseudo::{filter, match_metrics, BBox, ClassId, ClassMetrics, Detection, GroundTruthBox, KeepCounts};

fn record_error(kind: &str, index: usize, what: impl std::fmt::Display) -> Error {
    Error::Data(format!("{kind} record {index}: {what}"))
}

fn field<'a>(rec: &'a Value, name: &str, kind: &str, index: usize) -> Result<&'a Value> {
    rec.get(name)
        .ok_or_else(|| record_error(kind, index, format!("missing field `{name}`")))
}

fn parse_common(rec: &Value, kind: &str, index: usize) -> Result<(u64, ClassId, BBox)> {
    if !rec.is_object() {
        return Err(record_error(kind, index, "not an object"));
    }
    let image_id = field(rec, "image_id", kind, index)?
        .as_u64()
        .ok_or_else(|| record_error(kind, index, "`image_id` must be a non-negative integer"))?;
    let class = field(rec, "category_id", kind, index)?
        .as_u64()
        .filter(|&v| v <= u32::MAX as u64)
        .ok_or_else(|| record_error(kind, index, "`category_id` must be a non-negative integer"))?;
    let arr = field(rec, "bbox", kind, index)?
        .as_array()
        .filter(|a| a.len() == 4)
        .ok_or_else(|| record_error(kind, index, "`bbox` must be an array of 4 numbers"))?;
    let mut v = [0.0; 4];
    for (slot, x) in v.iter_mut().zip(arr) {
        *slot = x
            .as_f64()
            .ok_or_else(|| record_error(kind, index, "`bbox` must be an array of 4 numbers"))?;
    }
    let bbox = BBox::new(v[0], v[1], v[2], v[3]).map_err(|e| record_error(kind, index, e))?;
    Ok((image_id, ClassId(class as u32), bbox))
}

/// Parses a results document, keeping each original record alongside its detection.
pub fn parse_results(text: &str) -> Result<Vec<(Value, Detection)>> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::Data(format!("results: invalid JSON: {e}")))?;
    let arr = doc
        .as_array()
        .ok_or_else(|| Error::Data("results: top level must be an array".to_string()))?;
    arr.iter()
        .enumerate()
        .map(|(i, rec)| {
            let (image_id, class_id, bbox) = parse_common(rec, "results", i)?;
            let score = field(rec, "score", "results", i)?
                .as_f64()
                .filter(|s| (0.0..=1.0).contains(s))
                .ok_or_else(|| record_error("results", i, "`score` must be a number in [0, 1]"))?;
            Ok((
                rec.clone(),
                Detection {
                    image_id,
                    class_id,
                    score,
                    bbox,
                },
            ))
        })
        .collect()
}

pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruthBox>> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| Error::Data(format!("ground truth: invalid JSON: {e}")))?;
    let arr = match &doc {
        Value::Array(a) => a,
        Value::Object(o) => o
            .get("annotations")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Data("ground truth: object lacks an `annotations` array".to_string()))?,
        _ => return Err(Error::Data("ground truth: expected array or object".to_string())),
    };
    arr.iter()
        .enumerate()
        .map(|(i, rec)| {
            let (image_id, class_id, bbox) = parse_common(rec, "ground truth", i)?;
            Ok(GroundTruthBox {
                image_id,
                class_id,
                bbox,
            })
        })
        .collect()
}

/// Where offline thresholds come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdSpec {
    /// One threshold for every class.
    Global(f64),
    PerClass(BTreeMap<ClassId, f64>),
}

impl ThresholdSpec {
    fn resolve(&self, dets: &[Detection]) -> BTreeMap<ClassId, f64> {
        match self {
            ThresholdSpec::Global(n) => dets.iter().map(|d| (d.class_id, *n)).collect(),
            ThresholdSpec::PerClass(m) => m.clone(),
        }
    }
}

/// A number, or an object mapping class ids to thresholds.
pub fn parse_thresholds_json(text: &str) -> Result<ThresholdSpec> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| Error::Data(format!("thresholds: invalid JSON: {e}")))?;
    match doc {
        Value::Number(n) => Ok(ThresholdSpec::Global(n.as_f64().unwrap_or(f64::NAN))),
        Value::Object(o) => {
            let mut m = BTreeMap::new();
            for (k, v) in o {
                let id: u32 = k
                    .parse()
                    .map_err(|_| Error::Data(format!("thresholds: class key `{k}` is not an integer")))?;
                let n = v
                    .as_f64()
                    .ok_or_else(|| Error::Data(format!("thresholds: value for class {k} is not a number")))?;
                m.insert(ClassId(id), n);
            }
            Ok(ThresholdSpec::PerClass(m))
        }
        _ => Err(Error::Data("thresholds: expected a number or an object".to_string())),
    }
}

/// Per-class thresholds from a `thresholds.csv` trajectory, at iteration
/// `at` or, when `None`, at the last iteration recorded for each class.
pub fn parse_threshold_trajectory(text: &str, at: Option<u64>) -> Result<ThresholdSpec> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header.trim() != "iter,class_id,mean,var,gamma,n" {
        return Err(Error::Data(format!("trajectory: unexpected header `{header}`")));
    }
    let mut m = BTreeMap::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || Error::Data(format!("trajectory: malformed row {}", i + 1));
        if cols.len() != 6 {
            return Err(bad());
        }
        let iter: u64 = cols[0].parse().map_err(|_| bad())?;
        let class: u32 = cols[1].parse().map_err(|_| bad())?;
        let n: f64 = cols[5].parse().map_err(|_| bad())?;
        if at.is_none_or(|t| t == iter) {
            m.insert(ClassId(class), n);
        }
    }
    if m.is_empty() {
        return Err(Error::Data("trajectory: no thresholds at the requested iteration".to_string()));
    }
    Ok(ThresholdSpec::PerClass(m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineReport {
    pub input: usize,
    pub kept: usize,
    pub counts: BTreeMap<ClassId, KeepCounts>,
    pub thresholds: BTreeMap<ClassId, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<BTreeMap<ClassId, ClassMetrics>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineFilter {
    pub kept: Vec<Value>,
    pub report: OfflineReport,
}

pub fn filter_offline(
    results: &str,
    thresholds: &ThresholdSpec,
    ground_truth: Option<&str>,
    iou_thr: f64,
) -> Result<OfflineFilter> {
    let parsed = parse_results(results)?;
    let dets: Vec<Detection> = parsed.iter().map(|(_, d)| d.clone()).collect();
    let map = thresholds.resolve(&dets);
    if let Some((i, d)) = dets.iter().enumerate().find(|(_, d)| !map.contains_key(&d.class_id)) {
        return Err(record_error("results", i, format!("no threshold for class {}", d.class_id)));
    }
    let report = filter(&dets, &map)?;
    let metrics = match ground_truth {
        Some(text) => {
            let gt = parse_ground_truth(text)?;
            Some(match_metrics(&report.kept, &gt, iou_thr)?.per_class)
        }
        None => None,
    };
    let kept = report.kept_indices.iter().map(|&i| parsed[i].0.clone()).collect();
    Ok(OfflineFilter {
        kept,
        report: OfflineReport {
            input: dets.len(),
            kept: report.kept.len(),
            counts: report.counts,
            thresholds: map,
            metrics,
        },
    })
}

/// Per-class metrics as CSV: `class_id,tp,fp,fn,precision,recall,f1`.
pub fn metrics_table_csv(metrics: &BTreeMap<ClassId, ClassMetrics>) -> String {
    let mut out = String::from("class_id,tp,fp,fn,precision,recall,f1\n");
    for (c, m) in metrics {
        out.push_str(&format!(
            "{c},{},{},{},{},{},{}\n",
            m.tp, m.fp, m.fn_, m.precision, m.recall, m.f1
        ));
    }
    out
}
