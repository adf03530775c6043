//! Synthetic scenes with exact ground-truth depth.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use std::path::Path;

use crate::colmap::{
    uniform_split, write_sparse_model, CameraKind, ColmapCamera, ColmapImage, DatasetSplit, ModelFormat, Point3D,
    SparseModel, TestView, TrainView,
};
use crate::error::{Error, Result};
use crate::io::{save_image, write_pfm, ColorImage, ScalarMap};
use crate::scene::camera::rotation_to_quaternion;
use crate::render::oracle_render;
use crate::scene::{logit, CameraModel, Gaussian3D, GaussianCloud, SH_C0, SH_COEFFS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_gaussians: usize,
    pub width: usize,
    pub height: usize,
    pub views: usize,
    pub ring_radius: f64,
    /// Angular span of the camera arc in degrees.
    pub arc_degrees: f64,
    /// Camera height above the ring plane, as a fraction of the radius.
    pub elevation: f64,
    pub focal: f64,
    pub min_sigma: f64,
    pub max_sigma: f64,
    pub min_opacity: f64,
    pub max_opacity: f64,
    /// Prior pixels need at least this ground-truth alpha.
    pub prior_alpha_min: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_gaussians: 50,
            width: 64,
            height: 64,
            views: 20,
            ring_radius: 3.0,
            arc_degrees: 360.0,
            elevation: 0.15,
            focal: 70.0,
            min_sigma: 0.02,
            max_sigma: 0.1,
            min_opacity: 0.5,
            max_opacity: 0.95,
            prior_alpha_min: 0.5,
        }
    }
}

/// Ground-truth cloud, cameras and oracle renders for every camera.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub seed: u64,
    pub config: SynthConfig,
    pub gt: GaussianCloud,
    pub cameras: Vec<CameraModel>,
    pub images: Vec<ColorImage>,
    /// Blended (un-normalized) depth.
    pub depths: Vec<Vec<f64>>,
    pub alphas: Vec<Vec<f64>>,
}

/// Gaussians in the unit ball around their centroid, viewed by cameras on an
/// arc looking at the centroid. Deterministic per seed.
pub fn make_synthetic(seed: u64, config: &SynthConfig) -> Result<SyntheticScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(config.n_gaussians);
    while positions.len() < config.n_gaussians {
        let p = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if p.norm() <= 1.0 {
            positions.push(p);
        }
    }
    // recenter on the centroid and keep every center inside the unit ball
    let centroid = positions.iter().sum::<Vector3<f64>>() / positions.len().max(1) as f64;
    let far = positions.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
    let shrink = if far > 1.0 { 1.0 / far } else { 1.0 };
    let mut gt = GaussianCloud::new(1.0);
    for p in &positions {
        let p = (p - centroid) * shrink;
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let q = if q.iter().map(|v| v * v).sum::<f64>() < 1e-8 { [1.0, 0.0, 0.0, 0.0] } else { q };
        let log_scale = std::array::from_fn(|_| rng.random_range(config.min_sigma..=config.max_sigma).ln());
        let opacity = rng.random_range(config.min_opacity..=config.max_opacity);
        let mut sh = [0.0; SH_COEFFS];
        for ch in 0..3 {
            sh[ch * 4] = (rng.random_range(0.0..1.0) - 0.5) / SH_C0;
        }
        gt.push(Gaussian3D {
            position: [p.x, p.y, p.z],
            log_scale,
            rotation: q,
            opacity_logit: logit(opacity),
            sh_coeffs: sh,
        });
    }
    let cameras = arc_cameras(config)?;
    gt.scene_extent = crate::colmap::camera_extent(&cameras.iter().map(|c| c.center()).collect::<Vec<_>>());
    let mut images = Vec::with_capacity(cameras.len());
    let mut depths = Vec::with_capacity(cameras.len());
    let mut alphas = Vec::with_capacity(cameras.len());
    for cam in &cameras {
        let out = oracle_render::<f64>(&gt, cam, [0.0; 3]);
        images.push(ColorImage {
            width: cam.width,
            height: cam.height,
            data: out.color.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        });
        depths.push(out.depth);
        alphas.push(out.alpha);
    }
    Ok(SyntheticScene {
        seed,
        config: config.clone(),
        gt,
        cameras,
        images,
        depths,
        alphas,
    })
}

/// Cameras evenly spaced on an arc of `arc_degrees` around the origin, in
/// the `x`–`z` plane, slightly raised and looking at the origin. World `−y` is up.
/// An arc of 360° or more is a closed ring with `m` equal gaps.
pub fn arc_cameras(config: &SynthConfig) -> Result<Vec<CameraModel>> {
    let m = config.views;
    let ring = config.arc_degrees >= 360.0;
    let step = match (ring, m) {
        (true, _) => std::f64::consts::TAU / m as f64,
        (false, 0 | 1) => 0.0,
        (false, _) => config.arc_degrees.to_radians() / (m - 1) as f64,
    };
    (0..m)
        .map(|i| {
            let theta = (i as f64 - 0.5 * (m as f64 - 1.0)) * step;
            let dir = Vector3::new(theta.sin(), -config.elevation, -theta.cos()).normalize();
            let eye = dir * config.ring_radius;
            CameraModel::look_at(
                eye,
                Vector3::zeros(),
                Vector3::new(0.0, -1.0, 0.0),
                config.focal,
                config.width,
                config.height,
            )
        })
        .collect()
}

impl SyntheticScene {
    /// Fraction of Gaussian centers that project inside camera `i`'s image.
    pub fn in_frustum_fraction(&self, i: usize) -> f64 {
        let cam = &self.cameras[i];
        let inside = self
            .gt
            .positions
            .iter()
            .filter(|p| {
                let pc = cam.rotation_w2c * Vector3::from(**p) + cam.translation_w2c;
                if pc.z <= cam.znear {
                    return false;
                }
                let u = cam.fx * pc.x / pc.z + cam.cx;
                let v = cam.fy * pc.y / pc.z + cam.cy;
                (-0.5..cam.width as f64 - 0.5).contains(&u) && (-0.5..cam.height as f64 - 0.5).contains(&v)
            })
            .count();
        inside as f64 / self.gt.len().max(1) as f64
    }

    /// Training view `i` whose prior is the ground-truth depth times `scale`,
    /// valid where the ground-truth alpha reaches `prior_alpha_min`.
    pub fn train_view(&self, i: usize, scale: f64) -> TrainView {
        let valid_mask: Vec<bool> = self.alphas[i]
            .iter()
            .zip(&self.depths[i])
            .map(|(&a, &d)| a >= self.config.prior_alpha_min && d > 0.0)
            .collect();
        let prior_depth = self.depths[i]
            .iter()
            .zip(&valid_mask)
            .map(|(&d, &ok)| if ok { d * scale } else { 0.0 })
            .collect();
        TrainView {
            name: view_name(i),
            camera: self.cameras[i].clone(),
            image: self.images[i].clone(),
            prior_depth,
            valid_mask,
        }
    }

    /// The uniform 5/3 split over the cameras.
    pub fn split(&self, prior_scale: f64) -> Result<DatasetSplit> {
        let idx = uniform_split(self.cameras.len(), 5, 3)?;
        Ok(DatasetSplit {
            train: idx.train.iter().map(|&i| self.train_view(i, prior_scale)).collect(),
            test: idx
                .test
                .iter()
                .zip(&idx.extrapolated)
                .map(|(&i, &e)| TestView {
                    name: view_name(i),
                    camera: self.cameras[i].clone(),
                    image: self.images[i].clone(),
                    extrapolated: e,
                })
                .collect(),
        })
    }
}

pub fn view_name(i: usize) -> String {
    format!("view_{i:03}.png")
}

/// Options for writing a synthetic scene as a dataset directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetWriteOptions {
    /// Factor applied to every depth map.
    pub depth_scale: f64,
    /// Write `1/depth` (inverse-depth convention) instead of depth.
    pub inverse_depth: bool,
    pub format: ModelFormat,
}

impl Default for DatasetWriteOptions {
    fn default() -> Self {
        DatasetWriteOptions {
            depth_scale: 1.0,
            inverse_depth: false,
            format: ModelFormat::Text,
        }
    }
}

/// Writes `images/*.png`, `sparse/0/` and `depth/*.pfm` for every camera.
/// Depth pixels below the prior alpha threshold are written as 0 (invalid).
pub fn write_dataset(
    scene: &SyntheticScene,
    points: &[([f64; 3], [u8; 3])],
    dir: &Path,
    opts: &DatasetWriteOptions,
) -> Result<()> {
    let images_dir = dir.join("images");
    let depth_dir = dir.join("depth");
    for d in [&images_dir, &depth_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut model = SparseModel::default();
    for (i, cam) in scene.cameras.iter().enumerate() {
        let id = i as u32 + 1;
        model.cameras.insert(
            id,
            ColmapCamera {
                id,
                kind: CameraKind::Pinhole,
                width: cam.width as u64,
                height: cam.height as u64,
                params: vec![cam.fx, cam.fy, cam.cx + 0.5, cam.cy + 0.5],
            },
        );
        let t = cam.translation_w2c;
        model.images.insert(
            id,
            ColmapImage {
                id,
                qvec: rotation_to_quaternion(&cam.rotation_w2c),
                tvec: [t.x, t.y, t.z],
                camera_id: id,
                name: view_name(i),
                points2d: Vec::new(),
            },
        );
        save_image(&scene.images[i], &images_dir.join(view_name(i)))?;
        let view = scene.train_view(i, 1.0);
        let data = view
            .prior_depth
            .iter()
            .zip(&view.valid_mask)
            .map(|(&d, &ok)| {
                if !ok {
                    0.0
                } else if opts.inverse_depth {
                    (1.0 / (d * opts.depth_scale)) as f32
                } else {
                    (d * opts.depth_scale) as f32
                }
            })
            .collect();
        let stem = view_name(i).trim_end_matches(".png").to_string();
        write_pfm(
            &ScalarMap {
                width: cam.width,
                height: cam.height,
                data,
            },
            &depth_dir.join(format!("{stem}.pfm")),
            true,
        )?;
    }
    for (k, (p, rgb)) in points.iter().enumerate() {
        let id = k as u64 + 1;
        model.points.insert(
            id,
            Point3D {
                id,
                xyz: *p,
                rgb: *rgb,
                error: 0.0,
                track: Vec::new(),
            },
        );
    }
    write_sparse_model(&model, &dir.join("sparse").join("0"), opts.format)
}
