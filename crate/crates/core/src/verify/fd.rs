//! Central finite-difference checks of the analytic gradients.
//!
//! The renderer is piecewise smooth: splats enter and leave pixel boxes,
//! cross the alpha thresholds, or stop blending early. A parameter is only
//! compared when both stencil points take the same discrete branches as the
//! base point; otherwise the step is shrunk a few times and, failing that,
//! the parameter is reported as skipped.

use std::fmt;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::colmap::TrainView;
use crate::error::{Error, Result};
use crate::io::ColorImage;
use crate::losses::{d_ssim_loss, l1_loss, scale_invariant_depth_loss, total_loss_from_buffers, LossWeights};
use crate::render::{oracle_active_set, render, render_backward, PixelAdjoints};
use crate::scene::sh::sh_to_color_unclamped;
use crate::scene::{logit, CameraModel, CloudGrads, Gaussian3D, GaussianCloud, ParamKind, PARAMS_PER_GAUSSIAN};

/// Relative step of the central difference.
pub const FD_REL_STEP: f64 = 1e-4;
/// Absolute floor of the step.
pub const FD_ABS_STEP: f64 = 1e-6;
/// Denominator floor of the relative error.
pub const FD_ERR_FLOOR: f64 = 1e-6;
const MAX_SHRINKS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossSelector {
    /// Sum of all rendered color values.
    ColorSum,
    L1,
    DSsim,
    Depth,
    Total,
}

impl LossSelector {
    pub const ALL: [LossSelector; 5] = [
        LossSelector::ColorSum,
        LossSelector::L1,
        LossSelector::DSsim,
        LossSelector::Depth,
        LossSelector::Total,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossSelector::ColorSum => "color_sum",
            LossSelector::L1 => "l1",
            LossSelector::DSsim => "d_ssim",
            LossSelector::Depth => "depth",
            LossSelector::Total => "total",
        }
    }
}

impl fmt::Display for LossSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LossSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossSelector::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown loss `{s}` (color_sum, l1, d_ssim, depth, total)")))
    }
}

/// Relative error with a floored denominator.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_ERR_FLOOR)
}

/// Step used for a parameter with current value `x`.
pub fn fd_step(x: f64) -> f64 {
    (FD_REL_STEP * x.abs()).max(FD_ABS_STEP)
}

/// Central difference of a scalar function of a vector, one coordinate.
pub fn central_difference(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    xp[k] = x[k] + h;
    let fp = f(&xp);
    xp[k] = x[k] - h;
    let fm = f(&xp);
    (fp - fm) / (2.0 * h)
}

/// Loss value and discrete-branch signature of one evaluation.
struct Evaluation {
    value: f64,
    signature: Vec<u64>,
}

/// Loss problem over a fixed camera and supervision.
pub struct GradProblem<'a> {
    pub camera: &'a CameraModel,
    pub view: &'a TrainView,
    pub weights: LossWeights,
    pub loss: LossSelector,
    pub background: [f64; 3],
}

impl GradProblem<'_> {
    fn evaluate(&self, cloud: &GaussianCloud) -> Result<Evaluation> {
        let out = render::<f64>(cloud, self.camera, self.background);
        let target = &self.view.image.data;
        let mask: Vec<bool> = (0..out.alpha.len())
            .map(|i| self.view.valid_mask[i] && out.alpha[i] >= self.weights.alpha_min)
            .collect();
        let value = match self.loss {
            LossSelector::ColorSum => out.color.iter().sum(),
            LossSelector::L1 => l1_loss(&out.color, target)?.0,
            LossSelector::DSsim => d_ssim_loss(&out.color, target, out.width, out.height)?.0,
            LossSelector::Depth => scale_invariant_depth_loss(&out.depth, &self.view.prior_depth, &mask)?.0,
            LossSelector::Total => total_loss_from_buffers(&out.color, &out.depth, &out.alpha, self.view, &self.weights)?.total,
        };
        let mut signature = oracle_active_set(cloud, self.camera);
        // L1 kinks and the depth mask
        let mut bits = 0u64;
        for (i, (c, t)) in out.color.iter().zip(target).enumerate() {
            bits = bits.rotate_left(1) ^ u64::from(c > t) ^ ((i as u64) << 32);
            if i % 64 == 63 {
                signature.push(bits);
            }
        }
        signature.push(bits);
        let (_, _, used) = scale_invariant_depth_loss(&out.depth, &self.view.prior_depth, &mask)?;
        signature.extend(used.chunks(64).map(|c| c.iter().fold(0u64, |a, &b| (a << 1) | u64::from(b))));
        // color clamp pattern per Gaussian
        let center = self.camera.center();
        for i in 0..cloud.len() {
            let d = Vector3::from(cloud.positions[i]) - center;
            let n = d.norm().max(1e-12);
            let c = sh_to_color_unclamped(&cloud.sh_coeffs[i], [d.x / n, d.y / n, d.z / n]);
            signature.push(c.iter().fold(0u64, |a, v| (a << 1) | u64::from(*v < 0.0)));
        }
        Ok(Evaluation { value, signature })
    }

    /// Analytic loss value and gradient on raw parameters.
    pub fn analytic(&self, cloud: &GaussianCloud) -> Result<(f64, CloudGrads)> {
        let out = render::<f64>(cloud, self.camera, self.background);
        let n = out.pixel_count();
        let target = &self.view.image.data;
        let zeros = vec![0.0; n];
        let mask: Vec<bool> = (0..n)
            .map(|i| self.view.valid_mask[i] && out.alpha[i] >= self.weights.alpha_min)
            .collect();
        let (value, d_color, d_depth) = match self.loss {
            LossSelector::ColorSum => (out.color.iter().sum(), vec![1.0; 3 * n], zeros.clone()),
            LossSelector::L1 => {
                let (v, g) = l1_loss(&out.color, target)?;
                (v, g, zeros.clone())
            }
            LossSelector::DSsim => {
                let (v, g) = d_ssim_loss(&out.color, target, out.width, out.height)?;
                (v, g, zeros.clone())
            }
            LossSelector::Depth => {
                let (v, g, _) = scale_invariant_depth_loss(&out.depth, &self.view.prior_depth, &mask)?;
                (v, vec![0.0; 3 * n], g)
            }
            LossSelector::Total => {
                let b = total_loss_from_buffers(&out.color, &out.depth, &out.alpha, self.view, &self.weights)?;
                (b.total, b.d_color, b.d_depth)
            }
        };
        let adj = PixelAdjoints::from_f64(&d_color, &d_depth, &zeros);
        Ok((value, render_backward(cloud, self.camera, &out, &adj)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamCheck {
    pub gaussian: usize,
    pub flat_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    pub step: f64,
    /// False when no step kept the discrete branches fixed.
    pub checked: bool,
}

impl ParamCheck {
    pub fn kind(&self) -> ParamKind {
        ParamKind::from_flat(self.flat_index)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub loss: LossSelector,
    pub loss_value: f64,
    pub entries: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn checked(&self) -> impl Iterator<Item = &ParamCheck> {
        self.entries.iter().filter(|e| e.checked)
    }

    pub fn checked_count(&self) -> usize {
        self.checked().count()
    }

    pub fn skipped_count(&self) -> usize {
        self.entries.len() - self.checked_count()
    }

    /// Worst compared parameter.
    pub fn worst(&self) -> Option<&ParamCheck> {
        self.checked().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }

    pub fn max_rel_error(&self) -> f64 {
        self.worst().map_or(0.0, |w| w.rel_error)
    }

    pub fn summary(&self) -> String {
        match self.worst() {
            Some(w) => format!(
                "{:<9} max rel err {:.3e} at gaussian {} {} (analytic {:.6e}, numeric {:.6e}); {} checked, {} skipped (non-smooth)",
                self.loss.name(),
                w.rel_error,
                w.gaussian,
                w.kind(),
                w.analytic,
                w.numeric,
                self.checked_count(),
                self.skipped_count()
            ),
            None => format!("{:<9} no smooth parameters to check", self.loss.name()),
        }
    }
}

/// Compares analytic and central-difference gradients for every raw
/// parameter of every Gaussian.
pub fn fd_gradient_check(cloud: &GaussianCloud, problem: &GradProblem<'_>) -> Result<GradCheckReport> {
    let (loss_value, grads) = problem.analytic(cloud)?;
    let base = problem.evaluate(cloud)?;
    let mut entries = Vec::with_capacity(cloud.len() * PARAMS_PER_GAUSSIAN);
    let mut work = cloud.clone();
    for i in 0..cloud.len() {
        let analytic_row = grads.flat(i);
        for k in 0..PARAMS_PER_GAUSSIAN {
            let kind = ParamKind::from_flat(k);
            let x = cloud.get(i).param(kind);
            let mut h = fd_step(x);
            let mut result = None;
            for _ in 0..=MAX_SHRINKS {
                let mut eval_at = |v: f64| -> Result<Evaluation> {
                    let mut g = cloud.get(i);
                    *g.param_mut(kind) = v;
                    work.set(i, g);
                    let e = problem.evaluate(&work);
                    work.set(i, cloud.get(i));
                    e
                };
                let plus = eval_at(x + h)?;
                let minus = eval_at(x - h)?;
                if plus.signature == base.signature && minus.signature == base.signature {
                    result = Some((plus.value - minus.value) / (2.0 * h));
                    break;
                }
                h *= 0.1;
            }
            let analytic = analytic_row[k];
            entries.push(match result {
                Some(numeric) => ParamCheck {
                    gaussian: i,
                    flat_index: k,
                    analytic,
                    numeric,
                    rel_error: relative_error(analytic, numeric),
                    step: h,
                    checked: true,
                },
                None => ParamCheck {
                    gaussian: i,
                    flat_index: k,
                    analytic,
                    numeric: f64::NAN,
                    rel_error: f64::NAN,
                    step: h,
                    checked: false,
                },
            });
        }
    }
    Ok(GradCheckReport {
        loss: problem.loss,
        loss_value,
        entries,
    })
}

/// A small random scene with supervision for gradient checks.
#[derive(Debug, Clone)]
pub struct GradCheckScene {
    pub cloud: GaussianCloud,
    pub camera: CameraModel,
    pub view: TrainView,
}

/// Random cloud in front of a camera, with random target image and prior.
/// Opacities stay in `[0.3, 0.9]` so the alpha clamp is rarely active.
pub fn random_gradcheck_scene(seed: u64, n_gaussians: usize, width: usize, height: usize) -> Result<GradCheckScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let focal = 0.9 * width as f64;
    let camera = CameraModel::look_at(
        Vector3::new(0.0, 0.0, -3.0),
        Vector3::zeros(),
        Vector3::new(0.0, -1.0, 0.0),
        focal,
        width,
        height,
    )?;
    let mut cloud = GaussianCloud::new(1.0);
    for _ in 0..n_gaussians {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let q = if q.iter().map(|v| v * v).sum::<f64>() < 1e-6 { [1.0, 0.0, 0.0, 0.0] } else { q };
        cloud.push(Gaussian3D {
            position: [
                rng.random_range(-0.8..0.8),
                rng.random_range(-0.8..0.8),
                rng.random_range(-0.5..0.5),
            ],
            log_scale: std::array::from_fn(|_| rng.random_range(0.05f64..0.25).ln()),
            rotation: q,
            opacity_logit: logit(rng.random_range(0.3..0.9)),
            sh_coeffs: std::array::from_fn(|k| {
                if k % 4 == 0 {
                    rng.random_range(-0.5..1.5)
                } else {
                    rng.random_range(-0.3..0.3)
                }
            }),
        });
    }
    let n = width * height;
    let mut image = ColorImage::new(width, height);
    image.data.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
    let prior_depth: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..5.0)).collect();
    let valid_mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.9)).collect();
    let prior_depth = prior_depth
        .iter()
        .zip(&valid_mask)
        .map(|(&d, &ok)| if ok { d } else { 0.0 })
        .collect();
    let view = TrainView {
        name: format!("gradcheck_{seed}"),
        camera: camera.clone(),
        image,
        prior_depth,
        valid_mask,
    };
    Ok(GradCheckScene { cloud, camera, view })
}
