use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use depthsplat_core::colmap::Dataset;
use depthsplat_core::metrics::evaluate;

use super::{create_dir, load_cloud, write_file};
use crate::config::ConfigFlags;
use crate::provenance::Provenance;

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint PLY or sidecar.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub flags: ConfigFlags,
    /// CSV of externally computed LPIPS values (`view,lpips`) to merge.
    #[arg(long)]
    pub lpips: Option<PathBuf>,
}

fn read_lpips(path: &std::path::Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once(','))
        .filter(|(v, x)| *v != "view" && x.trim().parse::<f64>().is_ok())
        .map(|(v, x)| (v.trim().to_string(), x.trim().to_string()))
        .collect())
}

pub fn run(args: EvalArgs) -> Result<()> {
    let cfg = args.flags.resolve()?;
    let out = cfg.out()?.to_path_buf();
    let ds = Dataset::open(cfg.dataset()?, None)?;
    let split = ds.load_split(&cfg.ingest_options())?;
    let cloud = load_cloud(&args.checkpoint)?;
    let report = evaluate(&cloud, &split.test, cfg.train.background)?;
    let mut csv = report.csv();
    if let Some(p) = &args.lpips {
        let lp = read_lpips(p)?;
        csv = csv
            .lines()
            .map(|l| match l.split_once(',') {
                Some((view, _)) if l.ends_with(',') => match lp.get(view) {
                    Some(v) => format!("{l}{v}"),
                    None => l.to_string(),
                },
                _ => l.to_string(),
            })
            .collect::<Vec<_>>()
            .join("\n")
            + "\n";
    }
    create_dir(&out)?;
    write_file(&out.join("eval.csv"), csv)?;
    let table = report.table();
    write_file(&out.join("report.txt"), &table)?;
    println!("{table}");
    let mut prov = Provenance::start("eval", cfg.clone(), Some(cfg.train.seed));
    prov.finish(&out, "ok")?;
    Ok(())
}
