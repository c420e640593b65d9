use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use teachctl_core::RunConfig;

fn teachctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teachctl"))
        .args(args)
        .env_remove("TEACHCTL_OUT_DIR")
        .env_remove("TEACHCTL_LOG")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = teachctl(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// A 3-epoch, 30-iteration configuration for fast end-to-end runs.
fn short_config(dir: &Path) -> PathBuf {
    let p = dir.join("short.json");
    std::fs::write(&p, r#"{"loop": {"total_epochs": 3, "iters_per_epoch": 10}}"#).unwrap();
    p
}

fn csv_column(text: &str, name: &str) -> Vec<String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn default_run_matches_golden_summary() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--out", s(dir.path())]);
    let got = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let golden = include_str!("golden/summary_default.json");
    assert_eq!(got, golden);
    for f in ["metrics.csv", "thresholds.csv", "schedule.csv", "config.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn csv_headers_are_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    ok(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    let first = |f: &str| {
        std::fs::read_to_string(dir.path().join(f)).unwrap().lines().next().unwrap().to_string()
    };
    assert_eq!(
        first("metrics.csv"),
        "iter,epoch,mu,eta,n_0,n_1,n_2,precision,recall,f1,l_mask,l_teach,l_total"
    );
    assert_eq!(first("thresholds.csv"), "iter,class_id,mean,var,gamma,n");
    assert_eq!(first("schedule.csv"), "iter,epoch,x,eta,mu");
    let rows = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(rows.lines().count(), 31);
}

#[test]
fn fixed_mask_ratio_flag_holds_mu() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    ok(&["simulate", "--config", s(&cfg), "--out", s(dir.path()), "--fixed-mask-ratio", "0.5"]);
    let text = std::fs::read_to_string(dir.path().join("schedule.csv")).unwrap();
    assert!(csv_column(&text, "mu").iter().all(|m| m == "0.5"));
}

#[test]
fn fixed_threshold_flag_holds_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    ok(&["simulate", "--config", s(&cfg), "--out", s(dir.path()), "--fixed-threshold", "0.3"]);
    let text = std::fs::read_to_string(dir.path().join("thresholds.csv")).unwrap();
    let n = csv_column(&text, "n");
    assert_eq!(n.len(), 90);
    assert!(n.iter().all(|v| v == "0.3"));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let target = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_teachctl"))
        .args(["simulate", "--config", s(&cfg)])
        .env("TEACHCTL_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("summary.json").is_file());
}

#[test]
fn replicas_write_per_seed_directories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    ok(&["simulate", "--config", s(&cfg), "--out", s(dir.path()), "--seed", "5", "--replicas", "3"]);
    let mut summaries = Vec::new();
    for seed in 5..8 {
        let p = dir.path().join(format!("seed-{seed}/summary.json"));
        summaries.push(std::fs::read_to_string(p).unwrap());
    }
    assert_ne!(summaries[0], summaries[1]);

    // A replica equals a standalone run with the same seed.
    let single = dir.path().join("single");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&single), "--seed", "6"]);
    assert_eq!(std::fs::read_to_string(single.join("summary.json")).unwrap(), summaries[1]);
}

#[test]
fn resume_completes_a_stopped_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let full = dir.path().join("full");
    let part = dir.path().join("part");
    let rest = dir.path().join("rest");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&full)]);
    ok(&["simulate", "--config", s(&cfg), "--out", s(&part), "--checkpoint-at", "12", "--stop-after", "12"]);
    let partial = std::fs::read_to_string(part.join("metrics.csv")).unwrap();
    assert_eq!(partial.lines().count(), 13);
    ok(&["resume", s(&part.join("checkpoint-12.json")), "--out", s(&rest)]);
    for f in ["metrics.csv", "thresholds.csv", "schedule.csv", "summary.json"] {
        assert_eq!(
            std::fs::read(full.join(f)).unwrap(),
            std::fs::read(rest.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"scheduler": {"eta_min": 0.5}}"#).unwrap();
    let out = teachctl(&["simulate", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scheduler.eta_min"));

    std::fs::write(&bad, r#"{"sceduler": {}}"#).unwrap();
    let out = teachctl(&["simulate", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sceduler"));

    let out = teachctl(&["simulate", "--config", s(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(3));

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = short_config(dir.path());
    let out = teachctl(&["simulate", "--config", s(&cfg), "--out", s(&blocker.join("sub"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("file/sub"));

    let ckpt = dir.path().join("ckpt.json");
    std::fs::write(&ckpt, r#"{"schema_version": 1, "config": {"#).unwrap();
    assert_eq!(teachctl(&["resume", s(&ckpt)]).status.code(), Some(4));

    assert_eq!(teachctl(&["simulate", "--replicas", "0"]).status.code(), Some(2));
    assert_eq!(teachctl(&["no-such-command"]).status.code(), Some(2));
}

const FOUR: &str = r#"[
  {"image_id": 1, "category_id": 3, "bbox": [0, 0, 10, 10], "score": 0.2},
  {"image_id": 1, "category_id": 3, "bbox": [20, 0, 10, 10], "score": 0.5, "note": "a"},
  {"image_id": 1, "category_id": 3, "bbox": [40, 0, 10, 10], "score": 0.6},
  {"image_id": 1, "category_id": 3, "bbox": [60, 0, 10, 10], "score": 0.9}
]"#;

#[test]
fn filter_worked_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("r.json");
    let gt = dir.path().join("gt.json");
    std::fs::write(&results, FOUR).unwrap();
    std::fs::write(
        &gt,
        r#"{"annotations": [{"image_id": 1, "category_id": 3, "bbox": [20, 0, 10, 10]}]}"#,
    )
    .unwrap();
    let report = dir.path().join("report.json");
    let table = dir.path().join("m.csv");
    let out = ok(&[
        "filter", "--results", s(&results), "--threshold", "0.5", "--gt", s(&gt),
        "--report", s(&report), "--metrics-csv", s(&table),
    ]);
    let kept: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let kept = kept.as_array().unwrap();
    assert_eq!(kept.len(), 3);
    assert_eq!(kept[0]["note"], "a");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(report["kept"], 3);
    assert_eq!(report["counts"]["3"]["dropped"], 1);
    assert_eq!(report["metrics"]["3"]["tp"], 1);
    let table = std::fs::read_to_string(table).unwrap();
    assert!(table.starts_with("class_id,tp,fp,fn,precision,recall,f1\n3,1,2,0,"));
}

#[test]
fn filter_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("r.json");
    std::fs::write(&results, "[]").unwrap();
    let out = ok(&["filter", "--results", s(&results), "--threshold", "0.5"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "[]");

    std::fs::write(&results, FOUR).unwrap();
    let th = dir.path().join("th.json");
    std::fs::write(&th, r#"{"3": 0.95}"#).unwrap();
    let kept = dir.path().join("kept.json");
    ok(&["filter", "--results", s(&results), "--thresholds", s(&th), "--out", s(&kept)]);
    assert_eq!(std::fs::read_to_string(&kept).unwrap().trim(), "[]");

    std::fs::write(&results, r#"[{"image_id": 1, "category_id": 3, "bbox": [0, 0, 1, 1], "score": 0.4}, {"image_id": 1}]"#).unwrap();
    let out = teachctl(&["filter", "--results", s(&results), "--threshold", "0.5"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("record 1"));

    let out = teachctl(&["filter", "--results", s(&results)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn filter_with_logged_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    ok(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    let results = dir.path().join("r.json");
    std::fs::write(
        &results,
        r#"[{"image_id": 0, "category_id": 0, "bbox": [0, 0, 1, 1], "score": 0.26},
            {"image_id": 0, "category_id": 2, "bbox": [0, 0, 1, 1], "score": 0.99}]"#,
    )
    .unwrap();
    let traj = dir.path().join("thresholds.csv");
    let out = ok(&["filter", "--results", s(&results), "--trajectory", s(&traj), "--iter", "1"]);
    let kept: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(kept.as_array().unwrap().len(), 1);
    let out = teachctl(&["filter", "--results", s(&results), "--trajectory", s(&traj), "--iter", "999"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn schedule_trace_from_file_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let losses = dir.path().join("l.txt");
    std::fs::write(&losses, "1.0\n0.9\n0.8\n0.7\n").unwrap();
    let out = ok(&["schedule-trace", "--losses", s(&losses)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epoch,x,eta,loss,mu");
    assert_eq!(lines.len(), 5);
    // First three epochs: window still filling, loss equals its own baseline.
    let mu: Vec<f64> = csv_column(&text, "mu").iter().map(|v| v.parse().unwrap()).collect();
    assert!(mu[0] < 0.5 && mu[1] < mu[0] && mu[2] < mu[1] && mu[3] > mu[2]);

    let a = ok(&["schedule-trace", "--epochs", "30", "--seed", "4"]).stdout;
    let b = ok(&["schedule-trace", "--epochs", "30", "--seed", "4"]).stdout;
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 31);

    let out = teachctl(&["schedule-trace", "--losses", s(&losses), "--epochs", "9"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn gamma_trace_endpoints() {
    let out = ok(&["gamma-trace", "--total", "10"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 10.0);
    assert!((last[2] - 0.9999546).abs() < 1e-6);
    assert!((last[3] - 0.006693).abs() < 1e-6);
    assert_eq!(teachctl(&["gamma-trace", "--total", "0"]).status.code(), Some(2));
}

#[test]
fn bundled_scenarios_load() {
    let dir = repo_root().join("scenarios");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if path.file_name().unwrap() == "default.json" {
            let mut expected = RunConfig::default();
            expected.output_dir = cfg.output_dir.clone();
            assert_eq!(cfg, expected);
        }
        n += 1;
    }
    assert!(n >= 4);
}
