//! Differentiable tile rasterizer for color, depth and alpha.

pub mod oracle;
pub mod project;
pub mod raster;
pub mod tiles;

pub use oracle::{oracle_active_set, oracle_rasterize, oracle_render};
pub use project::{project, project_backward, Projection, ProjectedSplat, SplatGrad};
pub use raster::{rasterize_backward, rasterize_forward, PixelAdjoints, RenderOutput};
pub use tiles::{bin_and_sort, pixel_box, PixelBox, TileBins, TILE_SIZE};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::scene::{CameraModel, CloudGrads, GaussianCloud};

/// `project → bin_and_sort → rasterize_forward`.
pub fn render<T: Real>(cloud: &GaussianCloud, camera: &CameraModel, background: [f64; 3]) -> RenderOutput<T> {
    let projection = project(cloud, camera);
    let splats = projection.splats_as::<T>();
    let bins = bin_and_sort(&splats, camera.width, camera.height, TILE_SIZE);
    let mut out = rasterize_forward(splats, bins, background.map(T::from_f64));
    out.projection = Some(projection);
    out
}

/// Full backward chain from per-pixel adjoints to raw cloud parameters.
pub fn render_backward<T: Real>(
    cloud: &GaussianCloud,
    camera: &CameraModel,
    output: &RenderOutput<T>,
    adjoints: &PixelAdjoints<T>,
) -> Result<CloudGrads> {
    let projection = output
        .projection
        .as_ref()
        .ok_or_else(|| Error::MismatchedIntermediates("render has no saved projection".into()))?;
    if projection.cloud_len != cloud.len() || projection.splats.len() != output.splats.len() {
        return Err(Error::MismatchedIntermediates(format!(
            "render was produced for {} gaussians / {} splats, cloud has {}",
            projection.cloud_len,
            projection.splats.len(),
            cloud.len()
        )));
    }
    if output.width != camera.width || output.height != camera.height {
        return Err(Error::MismatchedIntermediates("camera size differs from render".into()));
    }
    let splat_grads: Vec<SplatGrad<f64>> = rasterize_backward(output, adjoints)?.iter().map(|g| g.to_f64()).collect();
    Ok(project_backward(cloud, camera, projection, &splat_grads))
}
