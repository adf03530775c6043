//! EWA projection of 3D Gaussians to screen-space splats, and its adjoint.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector3};

use crate::real::Real;
use crate::scene::gaussian::{covariance_backward, covariance_parts, sigmoid, CovarianceParts};
use crate::scene::sh::{sh_backward, sh_to_color};
use crate::scene::{CameraModel, CloudGrads, GaussianCloud};

/// Screen-space dilation added to the 2D covariance diagonal, in px².
pub const COV2D_DILATION: f64 = 0.3;
/// Splat extent in standard deviations.
pub const RADIUS_SIGMAS: f64 = 3.0;
/// Frustum guard band, as a multiple of the image half-extent.
pub const GUARD_BAND: f64 = 1.3;

/// A Gaussian projected to the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedSplat<T> {
    /// Pixel coordinates of the projected mean.
    pub center: [T; 2],
    /// Upper triangle `(a, b, c)` of the inverse 2D covariance.
    pub conic: [T; 3],
    /// Camera-space z of the mean.
    pub view_depth: T,
    /// Pixel radius of the 3σ extent.
    pub radius: T,
    pub opacity: T,
    pub color: [T; 3],
    pub source_index: usize,
}

impl ProjectedSplat<f64> {
    pub fn cast<T: Real>(&self) -> ProjectedSplat<T> {
        let c = T::from_f64;
        ProjectedSplat {
            center: self.center.map(c),
            conic: self.conic.map(c),
            view_depth: c(self.view_depth),
            radius: c(self.radius),
            opacity: c(self.opacity),
            color: self.color.map(c),
            source_index: self.source_index,
        }
    }
}

/// Per-splat geometry kept for the backward pass.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SplatGeometry {
    pub cam_pos: Vector3<f64>,
    /// `J W`
    pub jw: Matrix2x3<f64>,
    pub cov3: CovarianceParts,
    /// Dilated 2D covariance.
    pub conic_matrix: Matrix2<f64>,
    pub view_dir: [f64; 3],
    pub view_dist: f64,
    pub opacity: f64,
}

/// Output of [`project`]: splats in cloud order plus the geometry needed to
/// chain gradients back to the cloud.
#[derive(Debug, Clone)]
pub struct Projection {
    pub splats: Vec<ProjectedSplat<f64>>,
    pub(crate) geometry: Vec<SplatGeometry>,
    pub(crate) cloud_len: usize,
}

impl Projection {
    pub fn splats_as<T: Real>(&self) -> Vec<ProjectedSplat<T>> {
        self.splats.iter().map(|s| s.cast()).collect()
    }
}

/// Projects every Gaussian that survives culling.
///
/// Culled: camera-space z outside `(znear, zfar)`, mean outside the guard
/// band, degenerate 2D covariance, or a 3σ box that misses the image.
pub fn project(cloud: &GaussianCloud, camera: &CameraModel) -> Projection {
    let w = camera.rotation_w2c;
    let cam_center = camera.center();
    let guard_x = GUARD_BAND * (camera.cx + 0.5).max(camera.width as f64 - 0.5 - camera.cx);
    let guard_y = GUARD_BAND * (camera.cy + 0.5).max(camera.height as f64 - 0.5 - camera.cy);
    let mut splats = Vec::new();
    let mut geometry = Vec::new();

    for i in 0..cloud.len() {
        let mu = Vector3::from(cloud.positions[i]);
        let p = w * mu + camera.translation_w2c;
        let z = p.z;
        if !(z > camera.znear && z < camera.zfar) {
            continue;
        }
        let u = camera.fx * p.x / z + camera.cx;
        let v = camera.fy * p.y / z + camera.cy;
        if !((u - camera.cx).abs() <= guard_x && (v - camera.cy).abs() <= guard_y) {
            continue;
        }
        let cov3 = covariance_parts(cloud.log_scales[i], cloud.rotations[i]);
        let j = Matrix2x3::new(
            camera.fx / z,
            0.0,
            -camera.fx * p.x / (z * z),
            0.0,
            camera.fy / z,
            -camera.fy * p.y / (z * z),
        );
        let jw = j * w;
        let mut cov2 = jw * cov3.covariance * jw.transpose();
        cov2[(0, 0)] += COV2D_DILATION;
        cov2[(1, 1)] += COV2D_DILATION;
        let (a, b, c) = (cov2[(0, 0)], 0.5 * (cov2[(0, 1)] + cov2[(1, 0)]), cov2[(1, 1)]);
        let det = a * c - b * b;
        if !(det > 0.0 && det.is_finite()) {
            continue;
        }
        let conic = [c / det, -b / det, a / det];
        let mid = 0.5 * (a + c);
        let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
        let radius = RADIUS_SIGMAS * lambda_max.sqrt();
        if !(u + radius >= 0.0
            && u - radius <= camera.width as f64 - 1.0
            && v + radius >= 0.0
            && v - radius <= camera.height as f64 - 1.0)
        {
            continue;
        }
        // integer pixel box must be nonempty
        if (u - radius).ceil() > (u + radius).floor() || (v - radius).ceil() > (v + radius).floor() {
            continue;
        }

        let offset = mu - cam_center;
        let view_dist = offset.norm();
        let view_dir = if view_dist > 0.0 {
            [offset.x / view_dist, offset.y / view_dist, offset.z / view_dist]
        } else {
            [0.0, 0.0, 1.0]
        };
        let opacity = sigmoid(cloud.opacity_logits[i]);
        let color = sh_to_color(&cloud.sh_coeffs[i], view_dir);

        splats.push(ProjectedSplat {
            center: [u, v],
            conic,
            view_depth: z,
            radius,
            opacity,
            color,
            source_index: i,
        });
        geometry.push(SplatGeometry {
            cam_pos: p,
            jw,
            cov3,
            conic_matrix: Matrix2::new(conic[0], conic[1], conic[1], conic[2]),
            view_dir,
            view_dist,
            opacity,
        });
    }
    Projection {
        splats,
        geometry,
        cloud_len: cloud.len(),
    }
}

/// Gradient of a scalar loss with respect to one splat's fields.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SplatGrad<T> {
    pub center: [T; 2],
    pub conic: [T; 3],
    pub view_depth: T,
    pub opacity: T,
    pub color: [T; 3],
}

impl<T: Real> SplatGrad<T> {
    pub fn add(&mut self, o: &SplatGrad<T>) {
        for k in 0..2 {
            self.center[k] += o.center[k];
        }
        for k in 0..3 {
            self.conic[k] += o.conic[k];
            self.color[k] += o.color[k];
        }
        self.view_depth += o.view_depth;
        self.opacity += o.opacity;
    }

    pub fn to_f64(&self) -> SplatGrad<f64> {
        SplatGrad {
            center: self.center.map(|v| v.to_f64()),
            conic: self.conic.map(|v| v.to_f64()),
            view_depth: self.view_depth.to_f64(),
            opacity: self.opacity.to_f64(),
            color: self.color.map(|v| v.to_f64()),
        }
    }
}

/// Chains splat gradients through projection, covariance factorization and
/// activations down to the raw cloud parameters.
///
/// `splat_grads` is index-aligned with `projection.splats`.
pub fn project_backward(
    cloud: &GaussianCloud,
    camera: &CameraModel,
    projection: &Projection,
    splat_grads: &[SplatGrad<f64>],
) -> CloudGrads {
    assert_eq!(splat_grads.len(), projection.splats.len());
    let mut out = CloudGrads::zeros(cloud.len());
    let w = camera.rotation_w2c;
    let (fx, fy) = (camera.fx, camera.fy);
    let half_w = 0.5 * camera.width as f64;
    let half_h = 0.5 * camera.height as f64;

    for ((splat, geo), g) in projection.splats.iter().zip(&projection.geometry).zip(splat_grads) {
        let i = splat.source_index;
        out.visible[i] = true;

        out.opacity_logits[i] += g.opacity * geo.opacity * (1.0 - geo.opacity);

        let shg = sh_backward(&cloud.sh_coeffs[i], geo.view_dir, g.color);
        for k in 0..shg.coeffs.len() {
            out.sh_coeffs[i][k] += shg.coeffs[k];
        }
        let d = Vector3::from(geo.view_dir);
        let ddir = Vector3::from(shg.view_dir);
        let mut dmu = if geo.view_dist > 0.0 {
            (ddir - d * d.dot(&ddir)) / geo.view_dist
        } else {
            Vector3::zeros()
        };

        // conic = inverse(cov2): dL/dcov2 = -K G K
        let k = geo.conic_matrix;
        let gk = Matrix2::new(g.conic[0], 0.5 * g.conic[1], 0.5 * g.conic[1], g.conic[2]);
        let dcov2 = -(k * gk * k);
        let dcov3 = geo.jw.transpose() * dcov2 * geo.jw;
        let djw = 2.0 * dcov2 * geo.jw * geo.cov3.covariance;
        let dj = djw * w.transpose();

        let (x, y, z) = (geo.cam_pos.x, geo.cam_pos.y, geo.cam_pos.z);
        let (z2, z3) = (z * z, z * z * z);
        let [du, dv] = g.center;
        let gx = du * fx / z - dj[(0, 2)] * fx / z2;
        let gy = dv * fy / z - dj[(1, 2)] * fy / z2;
        let gz = g.view_depth - du * fx * x / z2 - dv * fy * y / z2 - dj[(0, 0)] * fx / z2
            + dj[(0, 2)] * 2.0 * fx * x / z3
            - dj[(1, 1)] * fy / z2
            + dj[(1, 2)] * 2.0 * fy * y / z3;
        dmu += w.transpose() * Vector3::new(gx, gy, gz);
        for k in 0..3 {
            out.positions[i][k] += dmu[k];
        }

        let (dls, dq) = covariance_backward(&geo.cov3, &sym3(&dcov3));
        for k in 0..3 {
            out.log_scales[i][k] += dls[k];
        }
        for k in 0..4 {
            out.rotations[i][k] += dq[k];
        }

        out.view_space_norms[i] = ((du * half_w).powi(2) + (dv * half_h).powi(2)).sqrt();
    }
    out
}

fn sym3(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}
