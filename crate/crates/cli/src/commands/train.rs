use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use depthsplat_core::colmap::{init_cloud, Dataset};
use depthsplat_core::scene::ply::write_ply;
use depthsplat_core::train::{Checkpoint, MetricsRow, Trainer, METRICS_HEADER};

use super::{create_dir, write_file};
use crate::config::ConfigFlags;
use crate::provenance::Provenance;

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub flags: ConfigFlags,
    /// Continue from a checkpoint sidecar (`.ckpt`) or its PLY.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

/// Keeps the header and rows up to `iteration`, dropping the rest.
fn truncate_metrics(path: &Path, iteration: usize) -> Result<()> {
    let mut kept = String::from(METRICS_HEADER);
    kept.push('\n');
    if path.is_file() {
        let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        for line in BufReader::new(f).lines().skip(1) {
            let line = line?;
            if let Some(row) = MetricsRow::parse(&line) {
                if row.iter <= iteration {
                    kept += &line;
                    kept.push('\n');
                }
            }
        }
    }
    write_file(path, kept)
}

pub fn run(args: TrainArgs) -> Result<()> {
    let cfg = args.flags.resolve()?;
    let out = cfg.out()?.to_path_buf();
    let dataset_dir = cfg.dataset()?.to_path_buf();
    create_dir(&out)?;
    write_file(&out.join("config.toml"), cfg.to_toml()?)?;
    let mut prov = Provenance::start("train", cfg.clone(), Some(cfg.train.seed));
    prov.write(&out)?;

    let dataset = Dataset::open(&dataset_dir, None)?;
    let split = dataset.load_split(&cfg.ingest_options())?;
    let metrics_path = out.join("metrics.csv");
    let mut trainer = match &args.resume {
        Some(p) => {
            let side = if p.extension().is_some_and(|e| e == "ckpt") {
                p.clone()
            } else {
                depthsplat_core::train::sidecar_for(p)
            };
            let ckpt = Checkpoint::load(&side)?;
            log::info!("resuming from {} at iteration {}", side.display(), ckpt.iteration);
            truncate_metrics(&metrics_path, ckpt.iteration)?;
            Trainer::resume(ckpt, split, cfg.train.clone())?
        }
        None => {
            write_file(&metrics_path, format!("{METRICS_HEADER}\n"))?;
            Trainer::new(init_cloud(&dataset.model)?, split, cfg.train.clone())?
        }
    };
    log::info!(
        "training {} gaussians on {} views for {} iterations",
        trainer.cloud.len(),
        trainer.train_views().len(),
        cfg.train.iterations
    );

    let ckpt_dir = out.join("checkpoints");
    let metrics_file = OpenOptions::new()
        .append(true)
        .open(&metrics_path)
        .with_context(|| format!("opening {}", metrics_path.display()))?;
    let mut metrics = BufWriter::new(metrics_file);
    let interval = cfg.train.checkpoint_interval;
    let result = trainer.run(|t, row| {
        writeln!(metrics, "{}", row.csv_line()).map_err(|e| depthsplat_core::Error::Io {
            path: metrics_path.clone(),
            source: e,
        })?;
        if row.iter % 100 == 0 || row.test_psnr.is_some() {
            let psnr = row.test_psnr.map(|p| format!(" test_psnr={p:.3}")).unwrap_or_default();
            log::info!(
                "iter {:>6} total={:.6} l1={:.6} depth={:.6} n={}{}",
                row.iter,
                row.total,
                row.l1,
                row.depth,
                row.gaussian_count,
                psnr
            );
        }
        if interval > 0 && row.iter % interval == 0 && !t.is_done() {
            t.checkpoint().save(&ckpt_dir)?;
        }
        Ok(())
    });
    metrics.flush().context("flushing metrics")?;
    if let Err(e) = result {
        let abort_ply = out.join(format!("abort_iter_{:06}.ply", trainer.iteration + 1));
        let _ = write_ply(&trainer.cloud, &abort_ply);
        let _ = write_file(&out.join("abort.txt"), format!("{e}\ncloud before the failing step: {}\n", abort_ply.display()));
        prov.finish(&out, "aborted")?;
        return Err(e.into());
    }
    let (ply, _) = trainer.checkpoint().save(&ckpt_dir)?;
    write_ply(&trainer.cloud, &out.join("final.ply"))?;
    if !trainer.test_views().is_empty() {
        let report = trainer.evaluate()?;
        write_file(&out.join("eval.csv"), report.csv())?;
        let table = report.table();
        write_file(&out.join("report.txt"), &table)?;
        println!("{table}");
    }
    println!("final checkpoint: {}", ply.display());
    prov.finish(&out, "ok")?;
    Ok(())
}
