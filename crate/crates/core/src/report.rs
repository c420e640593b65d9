//! CSV time series and the JSON run summary.
//!
//! Column layouts are fixed:
//!
//! * `metrics.csv`: `iter,epoch,mu,eta,n_<class>...,precision,recall,f1,l_mask,l_teach,l_total`
//! * `thresholds.csv`: `iter,class_id,mean,var,gamma,n` (mean/var empty when the class had no samples)
//! * `schedule.csv`: `iter,epoch,x,eta,mu`
//!
//! Floats use Rust's shortest round-trip formatting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pseudo::{ClassId, ClassMetrics};
use crate::teach::{MetricsLog, RunState};

pub fn metrics_csv(log: &MetricsLog, classes: &[ClassId]) -> String {
    let mut out = String::from("iter,epoch,mu,eta");
    for c in classes {
        let _ = write!(out, ",n_{c}");
    }
    out.push_str(",precision,recall,f1,l_mask,l_teach,l_total\n");
    for r in &log.rows {
        let _ = write!(out, "{},{},{},{}", r.iter, r.epoch, r.mu, r.eta);
        for c in classes {
            match r.thresholds.get(c) {
                Some(n) => {
                    let _ = write!(out, ",{n}");
                }
                None => out.push(','),
            }
        }
        let _ = writeln!(
            out,
            ",{},{},{},{},{},{}",
            r.precision, r.recall, r.f1, r.l_mask, r.l_teach, r.l_total
        );
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn thresholds_csv(log: &MetricsLog) -> String {
    let mut out = String::from("iter,class_id,mean,var,gamma,n\n");
    for t in &log.thresholds {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            t.iter,
            t.class_id,
            opt(t.mean),
            opt(t.var),
            t.gamma,
            t.n
        );
    }
    out
}

pub fn schedule_csv(log: &MetricsLog, total_epochs: u64) -> String {
    let mut out = String::from("iter,epoch,x,eta,mu\n");
    for r in &log.rows {
        let x = r.epoch as f64 / total_epochs as f64;
        let _ = writeln!(out, "{},{},{},{},{}", r.iter, r.epoch, x, r.eta, r.mu);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub iterations: u64,
    pub final_epoch: u64,
    pub final_mu: f64,
    pub final_thresholds: BTreeMap<ClassId, f64>,
    /// Pseudo-label quality pooled over the final epoch.
    pub per_class: BTreeMap<ClassId, ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

pub fn summarize(state: &RunState, seed: u64) -> Summary {
    let log = &state.log;
    let final_epoch = log.last_epoch().unwrap_or(0);
    let per_class = log.epoch_class_metrics(final_epoch);
    let avg = |f: fn(&ClassMetrics) -> f64| {
        if per_class.is_empty() {
            0.0
        } else {
            per_class.values().map(f).sum::<f64>() / per_class.len() as f64
        }
    };
    Summary {
        seed,
        iterations: state.cursor,
        final_epoch,
        final_mu: log.rows.last().map(|r| r.mu).unwrap_or(state.scheduler.mu_t),
        final_thresholds: log
            .rows
            .last()
            .map(|r| r.thresholds.clone())
            .unwrap_or_else(|| state.bank.thresholds()),
        macro_precision: avg(|m| m.precision),
        macro_recall: avg(|m| m.recall),
        macro_f1: avg(|m| m.f1),
        per_class,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `metrics.csv`, `thresholds.csv`, `schedule.csv` and `summary.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    state: &RunState,
    classes: &[ClassId],
    total_epochs: u64,
    seed: u64,
) -> Result<Summary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("metrics.csv"), &metrics_csv(&state.log, classes))?;
    write_file(&dir.join("thresholds.csv"), &thresholds_csv(&state.log))?;
    write_file(&dir.join("schedule.csv"), &schedule_csv(&state.log, total_epochs))?;
    let summary = summarize(state, seed);
    let json = serde_json::to_string_pretty(&summary).expect("summary serialises");
    write_file(&dir.join("summary.json"), &(json + "\n"))?;
    Ok(summary)
}
