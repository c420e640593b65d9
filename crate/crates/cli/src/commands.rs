use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use teachctl_core::coco::{
    filter_offline, metrics_table_csv, parse_threshold_trajectory, parse_thresholds_json,
    ThresholdSpec,
};
use teachctl_core::report::write_outputs;
use teachctl_core::run::{build_trainer, checkpoint_of, resume_trainer, SimTrainer};
use teachctl_core::{
    load_checkpoint, save_checkpoint, smoothing_coefficient, step_size, synthetic_losses,
    Error, GammaMode, Result, RunConfig, SchedulerState, VfstConfig,
};

use crate::{FilterArgs, GammaTraceArgs, OutputArgs, ResumeArgs, ScheduleTraceArgs, SimulateArgs};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(p) => write(p, contents),
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn config_error(field: &str, constraint: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        constraint: constraint.into(),
    }
}

/// Runs `trainer` to completion (or `stop_after`), saving requested
/// checkpoints on the way, then writes the reports into `out`.
fn drive(cfg: &RunConfig, mut trainer: SimTrainer, out: &Path, output: &OutputArgs) -> Result<()> {
    create_dir(out)?;
    let total = trainer.settings().loop_cfg.total_iters();
    let stop = output.stop_after.unwrap_or(total).min(total);
    let mut marks: Vec<u64> = output
        .checkpoint_at
        .iter()
        .copied()
        .filter(|&m| m > trainer.state().cursor && m <= stop)
        .collect();
    marks.sort_unstable();
    marks.dedup();
    for m in marks {
        trainer.run_until(m)?;
        let path = out.join(format!("checkpoint-{m}.json"));
        save_checkpoint(&checkpoint_of(cfg, &trainer), &path)?;
        info!("checkpoint written to {}", path.display());
    }
    trainer.run_until(stop)?;
    write(&out.join("config.json"), &(cfg.to_json_string() + "\n"))?;
    let summary = write_outputs(
        out,
        trainer.state(),
        &cfg.scenario.class_ids(),
        cfg.scheduler.total_epochs,
        cfg.seed,
    )?;
    info!(
        "seed {}: {} iterations, final mu {:.4}, macro F1 {:.4}; reports in {}",
        cfg.seed,
        summary.iterations,
        summary.final_mu,
        summary.macro_f1,
        out.display()
    );
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(mu) = args.fixed_mask_ratio {
        cfg.loop_cfg.ablation.fixed_mask_ratio = Some(mu);
    }
    if let Some(n) = args.fixed_threshold {
        cfg.loop_cfg.ablation.fixed_threshold = Some(n);
    }
    if args.no_teacher {
        cfg.loop_cfg.ablation.no_teacher = true;
    }
    if args.replicas == 0 {
        return Err(config_error("--replicas", "must be >= 1"));
    }
    cfg.validate()?;
    let out = args.output.out.clone().unwrap_or_else(|| cfg.output_dir.clone());

    if args.replicas == 1 {
        cfg.output_dir = out.clone();
        return drive(&cfg, build_trainer(&cfg)?, &out, &args.output);
    }

    let jobs: Vec<RunConfig> = (0..args.replicas as u64)
        .map(|i| {
            let mut c = cfg.clone();
            c.seed = cfg.seed.wrapping_add(i);
            c.output_dir = out.join(format!("seed-{}", c.seed));
            c
        })
        .collect();
    let results: Vec<Result<()>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|c| {
                let output = &args.output;
                scope.spawn(move || drive(c, build_trainer(c)?, &c.output_dir, output))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replica thread panicked"))
            .collect()
    });
    results.into_iter().collect()
}

pub fn resume(args: ResumeArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let mut cfg = ckpt.config.clone();
    let out = args.output.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    cfg.output_dir = out.clone();
    info!(
        "resuming seed {} at iteration {} from {}",
        cfg.seed,
        ckpt.state.cursor,
        args.checkpoint.display()
    );
    let trainer = resume_trainer(ckpt)?;
    drive(&cfg, trainer, &out, &args.output)
}

pub fn filter(args: FilterArgs) -> Result<()> {
    let spec = match (&args.threshold, &args.thresholds, &args.trajectory) {
        (Some(n), _, _) => {
            if !(0.0..=1.0).contains(n) {
                return Err(config_error("--threshold", "must lie in [0, 1]"));
            }
            ThresholdSpec::Global(*n)
        }
        (_, Some(p), _) => parse_thresholds_json(&read(p)?)?,
        (_, _, Some(p)) => parse_threshold_trajectory(&read(p)?, args.iter)?,
        _ => unreachable!("clap enforces one threshold source"),
    };
    let results = read(&args.results)?;
    let gt = args.gt.as_deref().map(read).transpose()?;
    let outcome = filter_offline(&results, &spec, gt.as_deref(), args.iou)?;
    let kept = serde_json::to_string_pretty(&outcome.kept).expect("JSON values serialise");
    emit(args.out.as_deref(), &(kept + "\n"))?;
    if let Some(p) = &args.report {
        let report = serde_json::to_string_pretty(&outcome.report).expect("report serialises");
        write(p, &(report + "\n"))?;
    }
    if let Some(p) = &args.metrics_csv {
        let metrics = outcome.report.metrics.as_ref().expect("--gt is required");
        write(p, &metrics_table_csv(metrics))?;
    }
    info!("kept {} of {} detections", outcome.report.kept, outcome.report.input);
    Ok(())
}

fn parse_losses(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, t)| {
            t.parse::<f64>()
                .map_err(|_| Error::Data(format!("losses: entry {i} (`{t}`) is not a number")))
        })
        .collect()
}

pub fn schedule_trace(args: ScheduleTraceArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?.scheduler,
        None => RunConfig::default().scheduler,
    };
    let given = args.losses.as_deref().map(read).transpose()?.map(|t| parse_losses(&t)).transpose()?;
    let epochs = match (args.epochs, &given) {
        (Some(e), _) => e,
        (None, Some(l)) => l.len() as u64,
        (None, None) => cfg.total_epochs,
    };
    cfg.total_epochs = epochs;
    cfg.validate()?;
    let losses = match given {
        Some(l) if (l.len() as u64) < epochs => {
            return Err(Error::Data(format!(
                "losses: {} values for {epochs} epochs",
                l.len()
            )))
        }
        Some(l) => l,
        None => synthetic_losses(epochs as usize, args.seed, args.noise)?,
    };

    let mut state = SchedulerState::new(&cfg);
    let mut csv = String::from("epoch,x,eta,loss,mu\n");
    for (i, &l) in losses.iter().take(epochs as usize).enumerate() {
        state.advance_epoch(&cfg)?;
        state.update_mask_ratio(&cfg, l)?;
        let x = state.epoch as f64 / epochs as f64;
        debug_assert_eq!(state.eta, step_size(x, &cfg)?);
        let _ = writeln!(csv, "{},{x},{},{l},{}", i + 1, state.eta, state.mu_t);
    }
    emit(args.out.as_deref(), &csv)
}

pub fn gamma_trace(args: GammaTraceArgs) -> Result<()> {
    if args.total == 0 {
        return Err(config_error("--total", "must be >= 1"));
    }
    let described = VfstConfig {
        alpha_at: args.alpha_at,
        gamma_mode: GammaMode::Described,
        ..VfstConfig::default()
    };
    described.validate()?;
    let literal = VfstConfig {
        gamma_mode: GammaMode::Literal,
        ..described.clone()
    };
    let mut csv = String::from("iter,x,gamma_literal,gamma_described\n");
    for i in 0..=args.total {
        let x = i as f64 / args.total as f64;
        let gl = smoothing_coefficient(i, args.total, &literal)?;
        let gd = smoothing_coefficient(i, args.total, &described)?;
        let _ = writeln!(csv, "{i},{x},{gl},{gd}");
    }
    emit(args.out.as_deref(), &csv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn losses_parse_mixed_separators() {
        assert_eq!(parse_losses("1, 0.5\n0.25 0.125").unwrap(), vec![1.0, 0.5, 0.25, 0.125]);
        assert!(matches!(parse_losses("1 x"), Err(Error::Data(_))));
    }
}
