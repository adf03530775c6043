//! Gaussian initialization from SfM points.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::model::SparseModel;
use crate::error::{Error, Result};
use crate::scene::{logit, Gaussian3D, GaussianCloud, SH_C0, SH_COEFFS};

pub const INIT_OPACITY: f64 = 0.1;
pub const INIT_NEIGHBORS: usize = 3;
pub const MIN_INIT_SCALE: f64 = 1e-7;

/// Radius of the bounding sphere (about the centroid) of the camera centers;
/// falls back to 1 when the centers coincide.
pub fn camera_extent(centers: &[Vector3<f64>]) -> f64 {
    if centers.is_empty() {
        return 1.0;
    }
    let centroid = centers.iter().sum::<Vector3<f64>>() / centers.len() as f64;
    let r = centers.iter().map(|c| (c - centroid).norm()).fold(0.0, f64::max);
    if r > 1e-9 && r.is_finite() {
        r
    } else {
        1.0
    }
}

/// One Gaussian per point: isotropic scale from the mean distance to the
/// nearest neighbours, identity rotation, opacity 0.1, DC color from RGB.
pub fn init_cloud_from_points(points: &[([f64; 3], [u8; 3])], scene_extent: f64) -> Result<GaussianCloud> {
    if points.len() <= INIT_NEIGHBORS {
        return Err(Error::EmptyCloud(format!(
            "need at least {} points for initialization, found {}",
            INIT_NEIGHBORS + 1,
            points.len()
        )));
    }
    if let Some((p, _)) = points.iter().find(|(p, _)| !p.iter().all(|v| v.is_finite())) {
        return Err(Error::DegenerateParameter(format!("non-finite point position {p:?}")));
    }
    let first = points[0].0;
    if points.iter().all(|(p, _)| *p == first) {
        return Err(Error::EmptyCloud("all points coincide".into()));
    }
    let pos: Vec<Vector3<f64>> = points.iter().map(|(p, _)| Vector3::from(*p)).collect();
    let mean_nn: Vec<f64> = (0..pos.len())
        .into_par_iter()
        .map(|i| {
            let mut best = [f64::INFINITY; INIT_NEIGHBORS];
            for (j, q) in pos.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d = (q - pos[i]).norm();
                if d < best[INIT_NEIGHBORS - 1] {
                    best[INIT_NEIGHBORS - 1] = d;
                    best.sort_by(f64::total_cmp);
                }
            }
            best.iter().sum::<f64>() / INIT_NEIGHBORS as f64
        })
        .collect();
    let opacity_logit = logit(INIT_OPACITY);
    let gaussians = points.iter().zip(&mean_nn).map(|((p, rgb), &d)| {
        let s = d.max(MIN_INIT_SCALE).ln();
        let mut sh = [0.0; SH_COEFFS];
        for ch in 0..3 {
            sh[ch * 4] = (rgb[ch] as f64 / 255.0 - 0.5) / SH_C0;
        }
        Gaussian3D {
            position: *p,
            log_scale: [s; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
            opacity_logit,
            sh_coeffs: sh,
        }
    });
    Ok(GaussianCloud::from_gaussians(gaussians, scene_extent))
}

/// Initializes from every SfM point, with the scene extent taken from the
/// model's camera centers.
pub fn init_cloud(model: &SparseModel) -> Result<GaussianCloud> {
    let points: Vec<_> = model.points.values().map(|p| (p.xyz, p.rgb)).collect();
    init_cloud_from_points(&points, camera_extent(&model.camera_centers()))
}
