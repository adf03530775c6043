pub mod ab;
pub mod eval;
pub mod gradcheck;
pub mod ingest;
pub mod render;
pub mod synth;
pub mod train;

use std::path::Path;

use anyhow::{Context, Result};
use depthsplat_core::scene::ply::read_ply;
use depthsplat_core::scene::GaussianCloud;
use depthsplat_core::train::{sidecar_for, Checkpoint};

/// Loads a cloud from a checkpoint PLY, preferring the exact sidecar when present.
pub fn load_cloud(path: &Path) -> Result<GaussianCloud> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext == "ckpt" {
        return Ok(Checkpoint::load(path)?.cloud);
    }
    let side = sidecar_for(path);
    if side.is_file() {
        return Ok(Checkpoint::load(&side)?.cloud);
    }
    read_ply(path).with_context(|| format!("reading {}", path.display()))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
