use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use depthsplat_core::colmap::Dataset;
use depthsplat_core::io::{save_image, write_pfm, ColorImage, ScalarMap};
use depthsplat_core::render::render;
use depthsplat_core::scene::CameraModel;
use depthsplat_core::Precision;

use super::{create_dir, load_cloud};
use crate::config::precision_from_env;

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Checkpoint PLY or sidecar.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset whose name-sorted views `--view` indexes.
    #[arg(long, requires = "view")]
    pub dataset: Option<PathBuf>,
    /// Index into the name-sorted dataset views.
    #[arg(long, requires = "dataset")]
    pub view: Option<usize>,
    /// JSON camera description instead of a dataset view.
    #[arg(long, conflicts_with_all = ["dataset", "view"])]
    pub camera: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub resolution_divisor: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the depth map as PFM.
    #[arg(long)]
    pub depth: bool,
    /// Also write the alpha map as PFM.
    #[arg(long)]
    pub alpha: bool,
}

pub fn run(args: RenderArgs) -> Result<()> {
    if args.resolution_divisor == 0 {
        bail!("--resolution-divisor must be ≥ 1");
    }
    let (name, camera) = match (&args.dataset, args.view, &args.camera) {
        (Some(dir), Some(idx), None) => {
            let ds = Dataset::open(dir, None)?;
            if idx >= ds.views.len() {
                bail!(
                    "view index {idx} out of range: dataset has {} views (valid indices 0..={})",
                    ds.views.len(),
                    ds.views.len().saturating_sub(1)
                );
            }
            let v = &ds.views[idx];
            let stem = std::path::Path::new(&v.name)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("view_{idx}"));
            (stem, v.camera.downscaled(args.resolution_divisor))
        }
        (None, None, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let cam: CameraModel =
                serde_json::from_str(&text).with_context(|| format!("parsing camera {}", path.display()))?;
            cam.validate()?;
            ("camera".to_string(), cam.downscaled(args.resolution_divisor))
        }
        _ => bail!("give either --dataset with --view, or --camera"),
    };
    let cloud = load_cloud(&args.checkpoint)?;
    let precision = precision_from_env()?.unwrap_or_default();
    let (color, depth, alpha) = match precision {
        Precision::F32 => {
            let o = render::<f32>(&cloud, &camera, [0.0; 3]);
            (o.color_f64(), o.depth_f64(), o.alpha_f64())
        }
        Precision::F64 => {
            let o = render::<f64>(&cloud, &camera, [0.0; 3]);
            (o.color, o.depth, o.alpha)
        }
    };
    create_dir(&args.out)?;
    let png = args.out.join(format!("{name}.png"));
    save_image(
        &ColorImage {
            width: camera.width,
            height: camera.height,
            data: color.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        },
        &png,
    )?;
    println!("wrote {}", png.display());
    let scalar = |data: &[f64]| ScalarMap {
        width: camera.width,
        height: camera.height,
        data: data.iter().map(|&v| v as f32).collect(),
    };
    if args.depth {
        let p = args.out.join(format!("{name}_depth.pfm"));
        write_pfm(&scalar(&depth), &p, true)?;
        println!("wrote {}", p.display());
    }
    if args.alpha {
        let p = args.out.join(format!("{name}_alpha.pfm"));
        write_pfm(&scalar(&alpha), &p, true)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}
