use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use depthsplat_core::density::RetentionPolicy;
use depthsplat_core::scene::ply::write_ply;
use depthsplat_core::train::metrics_log::metrics_csv;
use depthsplat_core::verify::{ab_experiment, make_synthetic, run_arm, AbConfig, SynthConfig};
use serde::{Deserialize, Serialize};

use super::{create_dir, write_file};
use crate::config::precision_from_env;
use crate::provenance::Provenance;

#[derive(Debug, Args)]
pub struct AbArgs {
    /// TOML file with `[ab]` (A/B settings) and `[synth]` (scene) tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Scene seeds, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Depth weight of the depth-aware arm.
    #[arg(long)]
    pub lambda_depth: Option<f64>,
    /// Global factor applied to every prior depth map.
    #[arg(long)]
    pub prior_scale: Option<f64>,
    /// Also run the pruning baseline (with depth) for the retention ablation.
    #[arg(long)]
    pub ablation: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbFile {
    pub ab: AbConfig,
    pub synth: SynthConfig,
}

#[derive(Debug, Serialize)]
struct SeedSummary {
    seed: u64,
    psnr_with_depth: f64,
    psnr_without_depth: f64,
    extrapolated_with_depth: Option<f64>,
    extrapolated_without_depth: Option<f64>,
    initial_count: usize,
    final_count_retain_all: usize,
    final_count_prune: Option<usize>,
    psnr_prune: Option<f64>,
}

pub fn run(args: AbArgs) -> Result<()> {
    let mut file = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<AbFile>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => AbFile::default(),
    };
    if let Some(p) = precision_from_env()? {
        file.ab.train.precision = p;
    }
    if let Some(n) = args.iterations {
        file.ab.train.iterations = n;
    }
    if let Some(l) = args.lambda_depth {
        file.ab.lambda_depth = l;
    }
    if let Some(c) = args.prior_scale {
        file.ab.prior_scale = c;
    }
    file.ab.train.validate()?;
    create_dir(&args.out)?;
    write_file(&args.out.join("config.toml"), toml::to_string(&file)?)?;
    let mut prov = Provenance::start("ab", &file, Some(file.ab.train.seed));
    prov.write(&args.out)?;

    let mut summaries = Vec::new();
    let mut text = String::new();
    for &seed in &args.seeds {
        let scene = make_synthetic(seed, &file.synth)?;
        let result = ab_experiment(&scene, &file.ab)?;
        let dir = args.out.join(format!("seed_{seed}"));
        create_dir(&dir)?;
        write_file(&dir.join("with_depth_metrics.csv"), metrics_csv(&result.with_depth.history))?;
        write_file(&dir.join("without_depth_metrics.csv"), metrics_csv(&result.without_depth.history))?;
        write_file(&dir.join("with_depth_eval.csv"), result.with_depth.report.csv())?;
        write_file(&dir.join("without_depth_eval.csv"), result.without_depth.report.csv())?;
        write_ply(&result.with_depth.cloud, &dir.join("with_depth.ply"))?;
        write_ply(&result.without_depth.cloud, &dir.join("without_depth.ply"))?;
        let mut block = format!("== scene seed {seed} ==\n{}", result.table());
        let prune = if args.ablation {
            let mut cfg = file.ab.clone();
            cfg.train.retention = RetentionPolicy::baseline_prune();
            let arm = run_arm(&scene, &cfg, cfg.lambda_depth)?;
            write_file(&dir.join("prune_metrics.csv"), metrics_csv(&arm.history))?;
            write_file(&dir.join("prune_eval.csv"), arm.report.csv())?;
            block += &format!(
                "prune baseline: mean PSNR {:.3}, gaussians {} -> {}\n",
                arm.report.mean_psnr, arm.initial_count, arm.final_count
            );
            Some(arm)
        } else {
            None
        };
        block += &format!(
            "gain: {:+.3} dB overall, {:+.3} dB extrapolated\n\n",
            result.psnr_gain(),
            result.extrapolated_psnr_gain()
        );
        print!("{block}");
        text += &block;
        summaries.push(SeedSummary {
            seed,
            psnr_with_depth: result.with_depth.report.mean_psnr,
            psnr_without_depth: result.without_depth.report.mean_psnr,
            extrapolated_with_depth: result.with_depth.report.extrapolated_psnr,
            extrapolated_without_depth: result.without_depth.report.extrapolated_psnr,
            initial_count: result.with_depth.initial_count,
            final_count_retain_all: result.with_depth.final_count,
            final_count_prune: prune.as_ref().map(|a| a.final_count),
            psnr_prune: prune.as_ref().map(|a| a.report.mean_psnr),
        });
    }
    let n = summaries.len().max(1) as f64;
    let mean_gain = summaries.iter().map(|s| s.psnr_with_depth - s.psnr_without_depth).sum::<f64>() / n;
    let mean_extrap = summaries
        .iter()
        .map(|s| s.extrapolated_with_depth.unwrap_or(f64::NAN) - s.extrapolated_without_depth.unwrap_or(f64::NAN))
        .sum::<f64>()
        / n;
    let footer = format!("mean gain over seeds: {mean_gain:+.3} dB overall, {mean_extrap:+.3} dB extrapolated\n");
    print!("{footer}");
    text += &footer;
    write_file(&args.out.join("ab_report.txt"), text)?;
    write_file(&args.out.join("ab_summary.json"), serde_json::to_string_pretty(&summaries)?)?;
    prov.finish(&args.out, "ok")?;
    Ok(())
}
