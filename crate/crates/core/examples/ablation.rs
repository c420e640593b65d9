//! Runs the default scenario under the full controllers and the two ablations
//! and prints the final-epoch pseudo-label macro-F1 of each.

use teachctl_core::report::summarize;
use teachctl_core::run::build_trainer;
use teachctl_core::RunConfig;

fn main() -> teachctl_core::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2024);
    let variants: [(&str, Option<f64>, Option<f64>); 3] = [
        ("full", None, None),
        ("fixed-threshold-0.5", None, Some(0.5)),
        ("fixed-mask-ratio-0.5", Some(0.5), None),
    ];
    for (name, mask, thr) in variants {
        let mut cfg = RunConfig { seed, ..Default::default() };
        cfg.loop_cfg.ablation.fixed_mask_ratio = mask;
        cfg.loop_cfg.ablation.fixed_threshold = thr;
        let mut trainer = build_trainer(&cfg)?;
        trainer.run()?;
        let s = summarize(trainer.state(), seed);
        println!(
            "{name:<22} macro_f1={:?} P={:.4} R={:.4} mu={:.3} thresholds={:?}",
            s.macro_f1, s.macro_precision, s.macro_recall, s.final_mu, s.final_thresholds
        );
    }
    Ok(())
}
