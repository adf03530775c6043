use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use depthsplat_core::losses::LossWeights;
use depthsplat_core::verify::{fd_gradient_check, random_gradcheck_scene, GradProblem, LossSelector};
use serde::Serialize;

use super::{create_dir, write_file};

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Number of random scenes.
    #[arg(long, default_value_t = 10)]
    pub scenes: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gaussians per scene (at most 16).
    #[arg(long, default_value_t = 16)]
    pub gaussians: usize,
    /// Image width and height (at most 32).
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    /// Restrict to one loss: color_sum, l1, d_ssim, depth or total.
    #[arg(long)]
    pub loss: Option<LossSelector>,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    /// Write `gradcheck.json` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Row {
    seed: u64,
    loss: LossSelector,
    max_rel_error: f64,
    worst_gaussian: Option<usize>,
    worst_param: Option<String>,
    checked: usize,
    skipped: usize,
}

pub fn run(args: GradcheckArgs) -> Result<()> {
    if args.gaussians == 0 || args.gaussians > 16 || args.size < 11 || args.size > 32 {
        bail!("gradcheck needs 1..=16 gaussians and an image size in 11..=32");
    }
    let losses: Vec<LossSelector> = match args.loss {
        Some(l) => vec![l],
        None => LossSelector::ALL.to_vec(),
    };
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for seed in args.seed..args.seed + args.scenes {
        let scene = random_gradcheck_scene(seed, args.gaussians, args.size, args.size)?;
        for &loss in &losses {
            let problem = GradProblem {
                camera: &scene.camera,
                view: &scene.view,
                weights: LossWeights::default(),
                loss,
                background: [0.0; 3],
            };
            let report = fd_gradient_check(&scene.cloud, &problem)?;
            println!("scene {seed:>3}: {}", report.summary());
            worst = worst.max(report.max_rel_error());
            let w = report.worst();
            rows.push(Row {
                seed,
                loss,
                max_rel_error: report.max_rel_error(),
                worst_gaussian: w.map(|w| w.gaussian),
                worst_param: w.map(|w| w.kind().to_string()),
                checked: report.checked_count(),
                skipped: report.skipped_count(),
            });
        }
    }
    println!("overall max relative error: {worst:.3e} (tolerance {:.1e})", args.tolerance);
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_file(&out.join("gradcheck.json"), serde_json::to_string_pretty(&rows)?)?;
    }
    if !(worst <= args.tolerance) {
        bail!("gradient check failed: max relative error {worst:.3e} exceeds {:.1e}", args.tolerance);
    }
    Ok(())
}
