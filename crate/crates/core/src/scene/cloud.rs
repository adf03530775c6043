use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::gaussian::{covariance_from_params, sigmoid};
use super::sh::SH_COEFFS;
use crate::error::Result;

/// One Gaussian's raw (pre-activation) parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian3D {
    pub position: [f64; 3],
    pub log_scale: [f64; 3],
    /// Raw quaternion `(w, x, y, z)`, normalized on use.
    pub rotation: [f64; 4],
    pub opacity_logit: f64,
    pub sh_coeffs: [f64; SH_COEFFS],
}

impl Gaussian3D {
    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(&self.log_scale)
            .chain(&self.rotation)
            .chain(&self.sh_coeffs)
            .chain(std::iter::once(&self.opacity_logit))
            .all(|v| v.is_finite())
    }
}

/// Activated parameters of one Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivatedGaussian {
    pub position: [f64; 3],
    pub covariance: Matrix3<f64>,
    pub scale: [f64; 3],
    pub rotation: [f64; 4],
    pub opacity: f64,
    pub sh_coeffs: [f64; SH_COEFFS],
}

/// Running sums of view-space positional gradient norms used for densification.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DensifyStats {
    pub grad_sum: Vec<f64>,
    pub count: Vec<u32>,
}

impl DensifyStats {
    pub fn zeros(n: usize) -> Self {
        DensifyStats {
            grad_sum: vec![0.0; n],
            count: vec![0; n],
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        if self.count[i] == 0 {
            0.0
        } else {
            self.grad_sum[i] / self.count[i] as f64
        }
    }

    pub fn reset(&mut self) {
        self.grad_sum.iter_mut().for_each(|v| *v = 0.0);
        self.count.iter_mut().for_each(|v| *v = 0);
    }
}

/// Index-aligned parameter arrays for a set of Gaussians.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussianCloud {
    pub positions: Vec<[f64; 3]>,
    pub log_scales: Vec<[f64; 3]>,
    pub rotations: Vec<[f64; 4]>,
    pub opacity_logits: Vec<f64>,
    pub sh_coeffs: Vec<[f64; SH_COEFFS]>,
    pub densify_stats: DensifyStats,
    /// Radius of the camera-center bounding sphere, in world units.
    pub scene_extent: f64,
}

impl GaussianCloud {
    pub fn new(scene_extent: f64) -> Self {
        GaussianCloud {
            scene_extent,
            ..Default::default()
        }
    }

    pub fn from_gaussians(gaussians: impl IntoIterator<Item = Gaussian3D>, scene_extent: f64) -> Self {
        let mut cloud = GaussianCloud::new(scene_extent);
        for g in gaussians {
            cloud.push(g);
        }
        cloud
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn push(&mut self, g: Gaussian3D) {
        self.positions.push(g.position);
        self.log_scales.push(g.log_scale);
        self.rotations.push(g.rotation);
        self.opacity_logits.push(g.opacity_logit);
        self.sh_coeffs.push(g.sh_coeffs);
        self.densify_stats.grad_sum.push(0.0);
        self.densify_stats.count.push(0);
    }

    pub fn get(&self, i: usize) -> Gaussian3D {
        Gaussian3D {
            position: self.positions[i],
            log_scale: self.log_scales[i],
            rotation: self.rotations[i],
            opacity_logit: self.opacity_logits[i],
            sh_coeffs: self.sh_coeffs[i],
        }
    }

    pub fn set(&mut self, i: usize, g: Gaussian3D) {
        self.positions[i] = g.position;
        self.log_scales[i] = g.log_scale;
        self.rotations[i] = g.rotation;
        self.opacity_logits[i] = g.opacity_logit;
        self.sh_coeffs[i] = g.sh_coeffs;
    }

    pub fn iter(&self) -> impl Iterator<Item = Gaussian3D> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Activated parameters of Gaussian `index`.
    pub fn activate(&self, index: usize) -> Result<ActivatedGaussian> {
        let g = self.get(index);
        let covariance = covariance_from_params(g.log_scale, g.rotation)?;
        let (rotation, _) = super::gaussian::normalize_quaternion(g.rotation);
        Ok(ActivatedGaussian {
            position: g.position,
            covariance,
            scale: g.log_scale.map(f64::exp),
            rotation,
            opacity: sigmoid(g.opacity_logit),
            sh_coeffs: g.sh_coeffs,
        })
    }

    /// Keeps only the Gaussians for which `keep[i]` is true.
    pub fn retain_mask(&mut self, keep: &[bool]) {
        assert_eq!(keep.len(), self.len());
        fn filter<T: Copy>(v: &mut Vec<T>, keep: &[bool]) {
            let mut i = 0;
            v.retain(|_| {
                let k = keep[i];
                i += 1;
                k
            });
        }
        filter(&mut self.positions, keep);
        filter(&mut self.log_scales, keep);
        filter(&mut self.rotations, keep);
        filter(&mut self.opacity_logits, keep);
        filter(&mut self.sh_coeffs, keep);
        filter(&mut self.densify_stats.grad_sum, keep);
        filter(&mut self.densify_stats.count, keep);
    }

    /// Checks index alignment and the activation invariants.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.len();
        let lens = [
            self.log_scales.len(),
            self.rotations.len(),
            self.opacity_logits.len(),
            self.sh_coeffs.len(),
            self.densify_stats.grad_sum.len(),
            self.densify_stats.count.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(format!("array lengths {lens:?} differ from count {n}"));
        }
        for i in 0..n {
            let g = self.get(i);
            if !g.is_finite() {
                return Err(format!("gaussian {i} has non-finite parameters"));
            }
            if g.log_scale.iter().any(|s| !(s.exp() > 0.0 && s.exp().is_finite())) {
                return Err(format!("gaussian {i} has degenerate scale"));
            }
            if g.rotation.iter().map(|v| v * v).sum::<f64>().sqrt() < super::gaussian::QUAT_NORM_FLOOR {
                return Err(format!("gaussian {i} has a zero quaternion"));
            }
            let o = sigmoid(g.opacity_logit);
            if !(o > 0.0 && o < 1.0) {
                return Err(format!("gaussian {i} opacity {o} outside (0, 1)"));
            }
            if self.densify_stats.grad_sum[i] < 0.0 {
                return Err(format!("gaussian {i} has negative densify stats"));
            }
        }
        Ok(())
    }
}

/// Gradients on raw parameters, index-aligned with a [`GaussianCloud`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CloudGrads {
    pub positions: Vec<[f64; 3]>,
    pub log_scales: Vec<[f64; 3]>,
    pub rotations: Vec<[f64; 4]>,
    pub opacity_logits: Vec<f64>,
    pub sh_coeffs: Vec<[f64; SH_COEFFS]>,
    /// Screen-space positional gradient norm per Gaussian (NDC units).
    pub view_space_norms: Vec<f64>,
    /// Whether the Gaussian produced a splat in the rendered view.
    pub visible: Vec<bool>,
}

impl CloudGrads {
    pub fn zeros(n: usize) -> Self {
        CloudGrads {
            positions: vec![[0.0; 3]; n],
            log_scales: vec![[0.0; 3]; n],
            rotations: vec![[0.0; 4]; n],
            opacity_logits: vec![0.0; n],
            sh_coeffs: vec![[0.0; SH_COEFFS]; n],
            view_space_norms: vec![0.0; n],
            visible: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Flattened gradient of Gaussian `i` in [`ParamKind`] order.
    pub fn flat(&self, i: usize) -> [f64; PARAMS_PER_GAUSSIAN] {
        let mut out = [0.0; PARAMS_PER_GAUSSIAN];
        out[0..3].copy_from_slice(&self.positions[i]);
        out[3..6].copy_from_slice(&self.log_scales[i]);
        out[6..10].copy_from_slice(&self.rotations[i]);
        out[10] = self.opacity_logits[i];
        out[11..23].copy_from_slice(&self.sh_coeffs[i]);
        out
    }

    pub fn all_finite(&self) -> bool {
        (0..self.len()).all(|i| self.flat(i).iter().all(|v| v.is_finite()))
    }
}

/// Number of raw scalar parameters per Gaussian.
pub const PARAMS_PER_GAUSSIAN: usize = 23;

/// Identifies one scalar raw parameter within a Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Position(usize),
    LogScale(usize),
    Rotation(usize),
    OpacityLogit,
    Sh(usize),
}

impl ParamKind {
    pub fn from_flat(k: usize) -> ParamKind {
        match k {
            0..=2 => ParamKind::Position(k),
            3..=5 => ParamKind::LogScale(k - 3),
            6..=9 => ParamKind::Rotation(k - 6),
            10 => ParamKind::OpacityLogit,
            11..=22 => ParamKind::Sh(k - 11),
            _ => panic!("flat parameter index {k} out of range"),
        }
    }
}

impl std::fmt::Display for ParamKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamKind::Position(k) => write!(f, "position[{k}]"),
            ParamKind::LogScale(k) => write!(f, "log_scale[{k}]"),
            ParamKind::Rotation(k) => write!(f, "rotation[{k}]"),
            ParamKind::OpacityLogit => write!(f, "opacity_logit"),
            ParamKind::Sh(k) => write!(f, "sh[{k}]"),
        }
    }
}

impl Gaussian3D {
    pub fn param(&self, kind: ParamKind) -> f64 {
        match kind {
            ParamKind::Position(k) => self.position[k],
            ParamKind::LogScale(k) => self.log_scale[k],
            ParamKind::Rotation(k) => self.rotation[k],
            ParamKind::OpacityLogit => self.opacity_logit,
            ParamKind::Sh(k) => self.sh_coeffs[k],
        }
    }

    pub fn param_mut(&mut self, kind: ParamKind) -> &mut f64 {
        match kind {
            ParamKind::Position(k) => &mut self.position[k],
            ParamKind::LogScale(k) => &mut self.log_scale[k],
            ParamKind::Rotation(k) => &mut self.rotation[k],
            ParamKind::OpacityLogit => &mut self.opacity_logit,
            ParamKind::Sh(k) => &mut self.sh_coeffs[k],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Gaussian3D {
        Gaussian3D {
            position: [0.1, 0.2, 0.3],
            log_scale: [-1.0, -2.0, -1.5],
            rotation: [2.0, 0.0, 0.0, 0.0],
            opacity_logit: 0.0,
            sh_coeffs: [0.0; SH_COEFFS],
        }
    }

    #[test]
    fn activation_normalizes_and_squashes() {
        let cloud = GaussianCloud::from_gaussians([sample()], 1.0);
        let a = cloud.activate(0).unwrap();
        assert_eq!(a.opacity, 0.5);
        assert_eq!(a.rotation, [1.0, 0.0, 0.0, 0.0]);
        assert!((a.scale[0] - (-1.0f64).exp()).abs() < 1e-15);
        assert!(cloud.check_invariants().is_ok());
    }

    #[test]
    fn retain_mask_keeps_alignment() {
        let mut cloud = GaussianCloud::new(1.0);
        for i in 0..5 {
            let mut g = sample();
            g.position[0] = i as f64;
            cloud.push(g);
        }
        cloud.retain_mask(&[true, false, true, false, true]);
        assert_eq!(cloud.len(), 3);
        assert_eq!(cloud.positions[1][0], 2.0);
        assert!(cloud.check_invariants().is_ok());
    }

    #[test]
    fn flat_param_roundtrip() {
        let mut g = sample();
        for k in 0..PARAMS_PER_GAUSSIAN {
            *g.param_mut(ParamKind::from_flat(k)) = k as f64;
        }
        for k in 0..PARAMS_PER_GAUSSIAN {
            assert_eq!(g.param(ParamKind::from_flat(k)), k as f64);
        }
    }
}
