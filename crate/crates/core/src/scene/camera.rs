use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ZNEAR: f64 = 0.01;
pub const DEFAULT_ZFAR: f64 = 100.0;

/// Pinhole intrinsics plus a rigid world-to-camera transform.
///
/// Camera space follows the COLMAP convention: `+x` right, `+y` down, `+z`
/// forward. Pixel `(i, j)` is centered at coordinate `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub rotation_w2c: Matrix3<f64>,
    pub translation_w2c: Vector3<f64>,
    pub znear: f64,
    pub zfar: f64,
}

impl CameraModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        rotation_w2c: Matrix3<f64>,
        translation_w2c: Vector3<f64>,
    ) -> Result<Self> {
        let cam = CameraModel {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation_w2c,
            translation_w2c,
            znear: DEFAULT_ZNEAR,
            zfar: DEFAULT_ZFAR,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `eye` looking at `target`, with `up` giving the world up direction.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        focal: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let forward = (target - eye).normalize();
        // camera +y points down, so right = forward × up would flip; use down = -up
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(r * eye);
        CameraModel::new(
            focal,
            focal,
            (width as f64 - 1.0) * 0.5,
            (height as f64 - 1.0) * 0.5,
            width,
            height,
            r,
            t,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rotation_w2c;
        let orth = (r * r.transpose() - Matrix3::identity()).abs().max();
        if !(orth <= 1e-6) {
            return Err(Error::InvalidCamera(format!(
                "rotation is not orthonormal (max deviation {orth:e})"
            )));
        }
        let det = r.determinant();
        if (det - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidCamera(format!("rotation determinant {det} != 1")));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(self.znear > 0.0 && self.znear < self.zfar) {
            return Err(Error::InvalidCamera(format!(
                "need 0 < znear < zfar (znear={}, zfar={})",
                self.znear, self.zfar
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("zero image size".into()));
        }
        if !self.translation_w2c.iter().all(|v| v.is_finite()) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::InvalidCamera("non-finite camera parameters".into()));
        }
        Ok(())
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation_w2c.transpose() * self.translation_w2c)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Intrinsics for an image downscaled by an integer factor.
    pub fn downscaled(&self, divisor: usize) -> CameraModel {
        if divisor <= 1 {
            return self.clone();
        }
        let d = divisor as f64;
        let mut cam = self.clone();
        cam.width = self.width / divisor;
        cam.height = self.height / divisor;
        cam.fx = self.fx / d;
        cam.fy = self.fy / d;
        // keep pixel-center alignment: centers of a d×d box map to one output pixel
        cam.cx = (self.cx + 0.5) / d - 0.5;
        cam.cy = (self.cy + 0.5) / d - 0.5;
        cam
    }
}

/// Rotation matrix of a COLMAP `(qw, qx, qy, qz)` quaternion (normalized first).
pub fn quaternion_to_rotation(q: [f64; 4]) -> Matrix3<f64> {
    let (unit, _) = crate::scene::gaussian::normalize_quaternion(q);
    crate::scene::gaussian::rotation_matrix(unit)
}

/// Quaternion `(w, x, y, z)` with `w >= 0` for a proper rotation matrix.
pub fn rotation_to_quaternion(r: &Matrix3<f64>) -> [f64; 4] {
    let rot = nalgebra::Rotation3::from_matrix_unchecked(*r);
    let q = nalgebra::UnitQuaternion::from_rotation_matrix(&rot);
    let mut out = [q.w, q.i, q.j, q.k];
    if out[0] < 0.0 {
        out = out.map(|v| -v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn look_at_puts_target_on_axis() {
        let cam = CameraModel::look_at(
            Vector3::new(3.0, 0.5, 0.0),
            Vector3::zeros(),
            Vector3::new(0.0, 1.0, 0.0),
            50.0,
            64,
            48,
        )
        .unwrap();
        let pc = cam.rotation_w2c * Vector3::zeros() + cam.translation_w2c;
        assert!(pc.x.abs() < 1e-12 && pc.y.abs() < 1e-12);
        assert!((pc.z - (3.0f64 * 3.0 + 0.25).sqrt()).abs() < 1e-12);
        assert!((cam.center() - Vector3::new(3.0, 0.5, 0.0)).norm() < 1e-12);
        // world up projects to image up (negative y)
        let up = cam.rotation_w2c * Vector3::new(0.0, 1.0, 0.0);
        assert!(up.y < 0.0);
    }

    #[test]
    fn rejects_invalid_cameras() {
        let bad_rot = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(CameraModel::new(10.0, 10.0, 5.0, 5.0, 10, 10, bad_rot, Vector3::zeros()).is_err());
        assert!(CameraModel::new(0.0, 10.0, 5.0, 5.0, 10, 10, Matrix3::identity(), Vector3::zeros()).is_err());
        let mut cam = CameraModel::new(10.0, 10.0, 5.0, 5.0, 10, 10, Matrix3::identity(), Vector3::zeros()).unwrap();
        cam.znear = 2.0;
        cam.zfar = 1.0;
        assert!(cam.validate().is_err());
    }

    #[test]
    fn quaternion_round_trip() {
        let q = [0.8, 0.1, -0.5, 0.3];
        let n = q.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
        let r = quaternion_to_rotation(q);
        let back = rotation_to_quaternion(&r);
        for k in 0..4 {
            assert!((back[k] - q[k] / n).abs() < 1e-12);
        }
    }

    #[test]
    fn downscale_halves_intrinsics() {
        let cam = CameraModel::new(100.0, 80.0, 63.5, 47.5, 128, 96, Matrix3::identity(), Vector3::zeros()).unwrap();
        let half = cam.downscaled(2);
        assert_eq!((half.width, half.height), (64, 48));
        assert_eq!(half.fx, 50.0);
        assert_eq!(half.cx, 31.5);
    }
}
