//! Naive reference renderer: one global depth sort, every pixel visits every
//! splat. Written separately from the tile path so the two can check each other.

use super::project::{project, ProjectedSplat};
use super::raster::{RenderOutput, ALPHA_MAX, ALPHA_MIN, TRANSMITTANCE_MIN};
use super::tiles::{depth_order, pixel_box};
use crate::real::Real;
use crate::scene::{CameraModel, GaussianCloud};

pub fn oracle_render<T: Real>(cloud: &GaussianCloud, camera: &CameraModel, background: [f64; 3]) -> RenderOutput<T> {
    let splats = project(cloud, camera).splats_as::<T>();
    oracle_rasterize(splats, camera.width, camera.height, background.map(T::from_f64)).0
}

/// Per-pixel hash of which splats were blended and whether blending stopped
/// early. Two parameter settings with equal signatures take the same discrete
/// branches through the renderer.
pub fn oracle_active_set(cloud: &GaussianCloud, camera: &CameraModel) -> Vec<u64> {
    let splats = project(cloud, camera).splats_as::<f64>();
    oracle_rasterize(splats, camera.width, camera.height, [0.0; 3]).1
}

pub fn oracle_rasterize<T: Real>(
    mut splats: Vec<ProjectedSplat<T>>,
    width: usize,
    height: usize,
    background: [T; 3],
) -> (RenderOutput<T>, Vec<u64>) {
    splats.sort_by(depth_order);
    let boxes: Vec<_> = splats.iter().map(|s| pixel_box(s, width, height)).collect();
    let n = width * height;
    let mut out = RenderOutput {
        width,
        height,
        color: vec![T::ZERO; 3 * n],
        depth: vec![T::ZERO; n],
        alpha: vec![T::ZERO; n],
        final_transmittance: vec![T::ONE; n],
        contributor_count: vec![0; n],
        last_contributor: vec![0; n],
        background,
        splats: Vec::new(),
        bins: None,
        projection: None,
    };
    let mut signatures = vec![0u64; n];
    let half = T::from_f64(0.5);

    for y in 0..height {
        for x in 0..width {
            let p = y * width + x;
            let (px, py) = (T::from_f64(x as f64), T::from_f64(y as f64));
            let mut trans = T::ONE;
            let mut rgb = [T::ZERO; 3];
            let mut depth = T::ZERO;
            let mut sig: u64 = 0xcbf2_9ce4_8422_2325;
            for (k, s) in splats.iter().enumerate() {
                let inside = boxes[k].is_some_and(|b| b.contains(x as u32, y as u32));
                if !inside {
                    continue;
                }
                let dx = px - s.center[0];
                let dy = py - s.center[1];
                let power = -(half * (s.conic[0] * dx * dx + s.conic[2] * dy * dy)) - s.conic[1] * dx * dy;
                let raw = s.opacity * power.exp();
                let a = raw.min(T::from_f64(ALPHA_MAX));
                if a < T::from_f64(ALPHA_MIN) {
                    continue;
                }
                let w = a * trans;
                rgb[0] += s.color[0] * w;
                rgb[1] += s.color[1] * w;
                rgb[2] += s.color[2] * w;
                depth += s.view_depth * w;
                trans *= T::ONE - a;
                out.contributor_count[p] += 1;
                out.last_contributor[p] = k as u32 + 1;
                let tag = (s.source_index as u64) << 1 | u64::from(raw > T::from_f64(ALPHA_MAX));
                sig = (sig ^ tag).wrapping_mul(0x0100_0000_01b3);
                if trans < T::from_f64(TRANSMITTANCE_MIN) {
                    sig = (sig ^ u64::MAX).wrapping_mul(0x0100_0000_01b3);
                    break;
                }
            }
            for ch in 0..3 {
                out.color[3 * p + ch] = rgb[ch] + background[ch] * trans;
            }
            out.depth[p] = depth;
            out.alpha[p] = T::ONE - trans;
            out.final_transmittance[p] = trans;
            signatures[p] = sig;
        }
    }
    out.splats = splats;
    (out, signatures)
}
