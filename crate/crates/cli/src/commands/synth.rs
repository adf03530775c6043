use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use depthsplat_core::colmap::ModelFormat;
use depthsplat_core::scene::ply::write_ply;
use depthsplat_core::verify::{make_synthetic, sparse_points, write_dataset, DatasetWriteOptions, InitConfig, SynthConfig};

use super::create_dir;

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub gaussians: usize,
    /// Image width and height.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 20)]
    pub views: usize,
    /// Factor applied to every written depth map.
    #[arg(long, default_value_t = 1.0)]
    pub depth_scale: f64,
    /// Write inverse depth instead of depth.
    #[arg(long)]
    pub inverse_depth: bool,
    /// Write the sparse model in COLMAP binary format.
    #[arg(long)]
    pub binary: bool,
    /// Fraction of ground-truth centers kept as sparse points.
    #[arg(long, default_value_t = InitConfig::default().fraction)]
    pub point_fraction: f64,
    /// Positional noise of the sparse points.
    #[arg(long, default_value_t = InitConfig::default().noise)]
    pub point_noise: f64,
}

pub fn run(args: SynthArgs) -> Result<()> {
    let config = SynthConfig {
        n_gaussians: args.gaussians,
        width: args.size,
        height: args.size,
        views: args.views,
        ..SynthConfig::default()
    };
    let scene = make_synthetic(args.seed, &config)?;
    let init = InitConfig {
        fraction: args.point_fraction,
        noise: args.point_noise,
        ..InitConfig::default()
    };
    let points = sparse_points(&scene, &init)?;
    create_dir(&args.out)?;
    write_dataset(
        &scene,
        &points,
        &args.out,
        &DatasetWriteOptions {
            depth_scale: args.depth_scale,
            inverse_depth: args.inverse_depth,
            format: if args.binary { ModelFormat::Binary } else { ModelFormat::Text },
        },
    )?;
    write_ply(&scene.gt, &args.out.join("ground_truth.ply"))?;
    println!(
        "wrote {} views, {} sparse points and {} ground-truth gaussians to {}",
        scene.cameras.len(),
        points.len(),
        scene.gt.len(),
        args.out.display()
    );
    Ok(())
}
