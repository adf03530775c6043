#![allow(dead_code)]

use depthsplat_core::scene::{logit, CameraModel, Gaussian3D, GaussianCloud, SH_C0, SH_COEFFS};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Camera at the origin looking down +z.
pub fn axis_camera(width: usize, height: usize, focal: f64) -> CameraModel {
    CameraModel::new(
        focal,
        focal,
        (width / 2) as f64,
        (height / 2) as f64,
        width,
        height,
        Matrix3::identity(),
        Vector3::zeros(),
    )
    .unwrap()
}

/// DC coefficients giving `rgb` in every direction.
pub fn dc_color(rgb: [f64; 3]) -> [f64; SH_COEFFS] {
    let mut sh = [0.0; SH_COEFFS];
    for c in 0..3 {
        sh[4 * c] = (rgb[c] - 0.5) / SH_C0;
    }
    sh
}

pub fn isotropic(position: [f64; 3], sigma: f64, opacity: f64, rgb: [f64; 3]) -> Gaussian3D {
    Gaussian3D {
        position,
        log_scale: [sigma.ln(); 3],
        rotation: [1.0, 0.0, 0.0, 0.0],
        opacity_logit: logit(opacity),
        sh_coeffs: dc_color(rgb),
    }
}

/// Random anisotropic Gaussians in front of [`axis_camera`].
pub fn random_cloud(seed: u64, n: usize, depth: (f64, f64)) -> GaussianCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussians: Vec<Gaussian3D> = (0..n)
        .map(|_| {
            let z = rng.random_range(depth.0..depth.1);
            let mut sh = [0.0; SH_COEFFS];
            for v in sh.iter_mut() {
                *v = rng.random_range(-0.8..0.8);
            }
            Gaussian3D {
                position: [rng.random_range(-0.6..0.6) * z, rng.random_range(-0.6..0.6) * z, z],
                log_scale: std::array::from_fn(|_| rng.random_range(-3.5f64..-1.2)),
                rotation: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
                opacity_logit: rng.random_range(-2.0..3.0),
                sh_coeffs: sh,
            }
        })
        .collect();
    GaussianCloud::from_gaussians(gaussians, 1.0)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
