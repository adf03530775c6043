use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use depthsplat_core::colmap::{init_cloud, Dataset, IngestOptions, ModelFormat};
use serde::Serialize;

use super::{create_dir, write_file};

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Dataset directory with `images/`, `sparse/0/` and `depth/`.
    pub dataset: PathBuf,
    /// Sparse model format; detected when omitted.
    #[arg(long, value_parser = ["bin", "txt"])]
    pub format: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub resolution_divisor: usize,
    /// Depth files hold inverse depth.
    #[arg(long)]
    pub invert_depth: bool,
    /// Also write `ingest.json` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct DepthSummary {
    view: String,
    valid_pixels: usize,
    min: f64,
    max: f64,
}

#[derive(Debug, Serialize)]
struct IngestReport {
    views: usize,
    cameras: usize,
    points: usize,
    scene_extent: f64,
    train: Vec<String>,
    test: Vec<(String, bool)>,
    depth: Vec<DepthSummary>,
}

pub fn run(args: IngestArgs) -> Result<()> {
    let format = args.format.as_deref().map(|f| match f {
        "bin" => ModelFormat::Binary,
        _ => ModelFormat::Text,
    });
    let dataset = Dataset::open(&args.dataset, format)?;
    let opts = IngestOptions {
        resolution_divisor: args.resolution_divisor,
        invert_depth: args.invert_depth,
        format,
        ..IngestOptions::default()
    };
    let split = dataset.load_split(&opts)?;
    let cloud = init_cloud(&dataset.model)?;
    let depth = split
        .train
        .iter()
        .map(|v| {
            let vals = v.prior_depth.iter().zip(&v.valid_mask).filter(|(_, &ok)| ok).map(|(&d, _)| d);
            let (min, max) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), d| (a.min(d), b.max(d)));
            DepthSummary {
                view: v.name.clone(),
                valid_pixels: v.valid_mask.iter().filter(|&&m| m).count(),
                min,
                max,
            }
        })
        .collect();
    let report = IngestReport {
        views: dataset.views.len(),
        cameras: dataset.model.cameras.len(),
        points: dataset.model.points.len(),
        scene_extent: cloud.scene_extent,
        train: split.train.iter().map(|v| v.name.clone()).collect(),
        test: split.test.iter().map(|v| (v.name.clone(), v.extrapolated)).collect(),
        depth,
    };
    println!("views:        {}", report.views);
    println!("cameras:      {}", report.cameras);
    println!("points:       {}", report.points);
    println!("scene extent: {:.6}", report.scene_extent);
    println!("train views:  {}", report.train.join(", "));
    let test: Vec<String> = report
        .test
        .iter()
        .map(|(n, e)| if *e { format!("{n} (extrapolated)") } else { n.clone() })
        .collect();
    println!("test views:   {}", test.join(", "));
    for d in &report.depth {
        println!(
            "depth {:<20} {} valid px, range [{:.6}, {:.6}]",
            d.view, d.valid_pixels, d.min, d.max
        );
    }
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_file(&out.join("ingest.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}
