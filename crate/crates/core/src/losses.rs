//! Training objective: L1, D-SSIM and the scale-invariant log-depth loss,
//! each with per-pixel adjoints.

use serde::{Deserialize, Serialize};

use crate::colmap::TrainView;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::render::RenderOutput;
use crate::ssim::ssim_with_grad;

/// Floor below which depths are not supervised.
pub const DEPTH_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight of D-SSIM; L1 gets `1 − lambda`.
    pub lambda: f64,
    pub lambda_depth: f64,
    /// Minimum accumulated alpha for a pixel to receive depth supervision.
    pub alpha_min: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda: 0.2,
            lambda_depth: 0.005,
            alpha_min: 0.5,
        }
    }
}

/// Loss terms plus adjoints with respect to rendered color and depth.
#[derive(Debug, Clone)]
pub struct LossBundle {
    pub l1: f64,
    pub d_ssim: f64,
    pub depth: f64,
    pub total: f64,
    /// dL/dC, interleaved RGB.
    pub d_color: Vec<f64>,
    /// dL/dD.
    pub d_depth: Vec<f64>,
    /// Pixels that entered the depth term.
    pub depth_mask: Vec<bool>,
}

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("{what}: {a} vs {b} values")));
    }
    Ok(())
}

/// Mean absolute error and its adjoint `sign(r − t) / N`.
pub fn l1_loss(rendered: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len(rendered.len(), target.len(), "l1 inputs")?;
    if rendered.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let inv_n = 1.0 / rendered.len() as f64;
    let mut sum = 0.0;
    let grad = rendered
        .iter()
        .zip(target)
        .map(|(&r, &t)| {
            let d = r - t;
            sum += d.abs();
            if d > 0.0 {
                inv_n
            } else if d < 0.0 {
                -inv_n
            } else {
                0.0
            }
        })
        .collect();
    Ok((sum * inv_n, grad))
}

/// `(1 − SSIM) / 2` over interleaved RGB images.
pub fn d_ssim_loss(rendered: &[f64], target: &[f64], width: usize, height: usize) -> Result<(f64, Vec<f64>)> {
    let (s, mut grad) = ssim_with_grad(rendered, target, width, height)?;
    grad.iter_mut().for_each(|g| *g *= -0.5);
    Ok(((1.0 - s) * 0.5, grad))
}

/// Half the variance of `log y − log y*` over the mask, with its adjoint on `y`.
///
/// Pixels where either depth is at or below [`DEPTH_EPS`] are excluded. With
/// no supervisable pixels the loss and adjoint are zero.
pub fn scale_invariant_depth_loss(
    rendered: &[f64],
    prior: &[f64],
    mask: &[bool],
) -> Result<(f64, Vec<f64>, Vec<bool>)> {
    check_len(rendered.len(), prior.len(), "depth inputs")?;
    check_len(rendered.len(), mask.len(), "depth mask")?;
    let used: Vec<bool> = (0..rendered.len())
        .map(|i| mask[i] && rendered[i] > DEPTH_EPS && prior[i] > DEPTH_EPS && rendered[i].is_finite() && prior[i].is_finite())
        .collect();
    let mut grad = vec![0.0; rendered.len()];
    let n = used.iter().filter(|&&u| u).count();
    if n == 0 {
        return Ok((0.0, grad, used));
    }
    let nf = n as f64;
    let d: Vec<f64> = (0..rendered.len())
        .map(|i| if used[i] { rendered[i].ln() - prior[i].ln() } else { 0.0 })
        .collect();
    let alpha = -d.iter().sum::<f64>() / nf;
    let mut loss = 0.0;
    for i in 0..rendered.len() {
        if used[i] {
            let r = d[i] + alpha;
            loss += r * r;
            grad[i] = r / (nf * rendered[i]);
        }
    }
    Ok((loss / (2.0 * nf), grad, used))
}

/// Weighted objective for one rendered training view.
pub fn total_loss<T: Real>(rendered: &RenderOutput<T>, view: &TrainView, weights: &LossWeights) -> Result<LossBundle> {
    let (w, h) = (view.camera.width, view.camera.height);
    if rendered.width != w || rendered.height != h {
        return Err(Error::DimensionMismatch(format!(
            "render is {}x{}, view {} is {w}x{h}",
            rendered.width, rendered.height, view.name
        )));
    }
    let color = rendered.color_f64();
    let depth = rendered.depth_f64();
    let alpha = rendered.alpha_f64();
    total_loss_from_buffers(&color, &depth, &alpha, view, weights)
}

/// [`total_loss`] on plain buffers.
pub fn total_loss_from_buffers(
    color: &[f64],
    depth: &[f64],
    alpha: &[f64],
    view: &TrainView,
    weights: &LossWeights,
) -> Result<LossBundle> {
    let (w, h) = (view.camera.width, view.camera.height);
    let target = &view.image.data;
    let (l1, g_l1) = l1_loss(color, target)?;
    let (d_ssim, g_ssim) = d_ssim_loss(color, target, w, h)?;
    check_len(alpha.len(), view.valid_mask.len(), "alpha vs mask")?;
    let mask: Vec<bool> = (0..view.valid_mask.len())
        .map(|i| view.valid_mask[i] && alpha[i] >= weights.alpha_min)
        .collect();
    let (depth_loss, g_depth, depth_mask) = scale_invariant_depth_loss(depth, &view.prior_depth, &mask)?;
    let wl1 = 1.0 - weights.lambda;
    let d_color = g_l1
        .iter()
        .zip(&g_ssim)
        .map(|(a, b)| wl1 * a + weights.lambda * b)
        .collect();
    let d_depth = g_depth.iter().map(|g| weights.lambda_depth * g).collect();
    Ok(LossBundle {
        l1,
        d_ssim,
        depth: depth_loss,
        total: wl1 * l1 + weights.lambda * d_ssim + weights.lambda_depth * depth_loss,
        d_color,
        d_depth,
        depth_mask,
    })
}
