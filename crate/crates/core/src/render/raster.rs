//! Front-to-back alpha blending of color, depth and alpha, and its exact adjoint.
//!
//! Per pixel, splats are visited in depth order with transmittance `T = 1`:
//! `α = min(0.99, o·exp(-½ Δᵀ K Δ))`, splats with `α < 1/255` are skipped,
//! `C += c α T`, `D += d α T`, `T *= 1 - α`, stopping once `T < 1e-4`.
//! Depth is left un-normalized.

use rayon::prelude::*;

use super::project::{ProjectedSplat, SplatGrad};
use super::tiles::{PixelBox, TileBins};
use crate::error::{Error, Result};
use crate::real::Real;

pub const ALPHA_MAX: f64 = 0.99;
pub const ALPHA_MIN: f64 = 1.0 / 255.0;
pub const TRANSMITTANCE_MIN: f64 = 1e-4;

/// Rendered channels plus what the backward pass needs.
#[derive(Debug, Clone)]
pub struct RenderOutput<T> {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB, `3 * width * height`, not clamped above.
    pub color: Vec<T>,
    pub depth: Vec<T>,
    pub alpha: Vec<T>,
    pub final_transmittance: Vec<T>,
    /// Number of splats actually blended into each pixel.
    pub contributor_count: Vec<u32>,
    /// One past the position (in the pixel's list) of the last blended splat.
    pub last_contributor: Vec<u32>,
    pub background: [T; 3],
    pub splats: Vec<ProjectedSplat<T>>,
    /// Present for tile renders, absent for oracle renders.
    pub bins: Option<TileBins>,
    pub(crate) projection: Option<super::project::Projection>,
}

impl<T: Real> RenderOutput<T> {
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn color_f64(&self) -> Vec<f64> {
        self.color.iter().map(|v| v.to_f64()).collect()
    }

    pub fn depth_f64(&self) -> Vec<f64> {
        self.depth.iter().map(|v| v.to_f64()).collect()
    }

    pub fn alpha_f64(&self) -> Vec<f64> {
        self.alpha.iter().map(|v| v.to_f64()).collect()
    }
}

/// Per-pixel loss adjoints `dL/dC`, `dL/dD`, `dL/dA`.
#[derive(Debug, Clone)]
pub struct PixelAdjoints<T> {
    pub color: Vec<T>,
    pub depth: Vec<T>,
    pub alpha: Vec<T>,
}

impl<T: Real> PixelAdjoints<T> {
    pub fn zeros(pixels: usize) -> Self {
        PixelAdjoints {
            color: vec![T::ZERO; 3 * pixels],
            depth: vec![T::ZERO; pixels],
            alpha: vec![T::ZERO; pixels],
        }
    }

    pub fn from_f64(color: &[f64], depth: &[f64], alpha: &[f64]) -> Self {
        PixelAdjoints {
            color: color.iter().map(|&v| T::from_f64(v)).collect(),
            depth: depth.iter().map(|&v| T::from_f64(v)).collect(),
            alpha: alpha.iter().map(|&v| T::from_f64(v)).collect(),
        }
    }
}

#[derive(Clone, Copy)]
struct PixelResult<T> {
    color: [T; 3],
    depth: T,
    transmittance: T,
    count: u32,
    last: u32,
}

#[inline]
fn gaussian_power<T: Real>(s: &ProjectedSplat<T>, px: T, py: T) -> (T, T, T) {
    let dx = px - s.center[0];
    let dy = py - s.center[1];
    let half = T::from_f64(0.5);
    let power = -(half * (s.conic[0] * dx * dx + s.conic[2] * dy * dy)) - s.conic[1] * dx * dy;
    (power, dx, dy)
}

fn blend_pixel<T: Real>(
    x: u32,
    y: u32,
    list: &[u32],
    splats: &[ProjectedSplat<T>],
    boxes: &[Option<PixelBox>],
) -> PixelResult<T> {
    let alpha_max = T::from_f64(ALPHA_MAX);
    let alpha_min = T::from_f64(ALPHA_MIN);
    let t_min = T::from_f64(TRANSMITTANCE_MIN);
    let (px, py) = (T::from_f64(x as f64), T::from_f64(y as f64));
    let mut t = T::ONE;
    let mut color = [T::ZERO; 3];
    let mut depth = T::ZERO;
    let mut count = 0;
    let mut last = 0;
    for (k, &si) in list.iter().enumerate() {
        let si = si as usize;
        match boxes[si] {
            Some(b) if b.contains(x, y) => {}
            _ => continue,
        }
        let s = &splats[si];
        let (power, _, _) = gaussian_power(s, px, py);
        let alpha = (s.opacity * power.exp()).min(alpha_max);
        if alpha < alpha_min {
            continue;
        }
        let weight = alpha * t;
        for ch in 0..3 {
            color[ch] += s.color[ch] * weight;
        }
        depth += s.view_depth * weight;
        t *= T::ONE - alpha;
        count += 1;
        last = k as u32 + 1;
        if t < t_min {
            break;
        }
    }
    PixelResult {
        color,
        depth,
        transmittance: t,
        count,
        last,
    }
}

/// Blends every tile in parallel. Each tile owns its pixels, so the result is
/// independent of scheduling.
pub fn rasterize_forward<T: Real>(
    splats: Vec<ProjectedSplat<T>>,
    bins: TileBins,
    background: [T; 3],
) -> RenderOutput<T> {
    let (width, height) = (bins.width, bins.height);
    let n = width * height;
    let tiles: Vec<Vec<(usize, PixelResult<T>)>> = (0..bins.tile_count())
        .into_par_iter()
        .map(|t| {
            let (x0, x1, y0, y1) = bins.tile_bounds(t);
            let list = &bins.lists[t];
            let mut out = Vec::with_capacity((x1 - x0) * (y1 - y0));
            for y in y0..y1 {
                for x in x0..x1 {
                    out.push((y * width + x, blend_pixel(x as u32, y as u32, list, &splats, &bins.boxes)));
                }
            }
            out
        })
        .collect();

    let mut output = RenderOutput {
        width,
        height,
        color: vec![T::ZERO; 3 * n],
        depth: vec![T::ZERO; n],
        alpha: vec![T::ZERO; n],
        final_transmittance: vec![T::ONE; n],
        contributor_count: vec![0; n],
        last_contributor: vec![0; n],
        background,
        splats,
        bins: None,
        projection: None,
    };
    for tile in tiles {
        for (p, r) in tile {
            for ch in 0..3 {
                output.color[3 * p + ch] = r.color[ch] + background[ch] * r.transmittance;
            }
            output.depth[p] = r.depth;
            output.alpha[p] = T::ONE - r.transmittance;
            output.final_transmittance[p] = r.transmittance;
            output.contributor_count[p] = r.count;
            output.last_contributor[p] = r.last;
        }
    }
    output.bins = Some(bins);
    output
}

/// Exact adjoint of [`rasterize_forward`].
///
/// Each pixel is walked back to front from its last blended splat, recovering
/// the transmittance in front of every splat from the saved final value.
/// Per-tile partial gradients are reduced in tile order, so results do not
/// depend on the thread count.
pub fn rasterize_backward<T: Real>(output: &RenderOutput<T>, adjoints: &PixelAdjoints<T>) -> Result<Vec<SplatGrad<T>>> {
    let bins = output
        .bins
        .as_ref()
        .ok_or_else(|| Error::MismatchedIntermediates("render has no tile bins (oracle output?)".into()))?;
    let n = output.pixel_count();
    if adjoints.color.len() != 3 * n || adjoints.depth.len() != n || adjoints.alpha.len() != n {
        return Err(Error::MismatchedIntermediates(format!(
            "adjoint sizes ({}, {}, {}) do not match a {}x{} render",
            adjoints.color.len(),
            adjoints.depth.len(),
            adjoints.alpha.len(),
            output.width,
            output.height
        )));
    }
    if bins.width != output.width || bins.height != output.height || bins.boxes.len() != output.splats.len() {
        return Err(Error::MismatchedIntermediates("tile bins do not match the render".into()));
    }
    for t in 0..bins.tile_count() {
        let (x0, x1, y0, y1) = bins.tile_bounds(t);
        let len = bins.lists[t].len() as u32;
        for y in y0..y1 {
            if output.last_contributor[y * output.width + x0..y * output.width + x1]
                .iter()
                .any(|&l| l > len)
            {
                return Err(Error::MismatchedIntermediates(format!(
                    "pixel contributor index exceeds tile {t} list length {len}"
                )));
            }
        }
    }

    let width = output.width;
    let splats = &output.splats;
    let partials: Vec<Vec<SplatGrad<T>>> = (0..bins.tile_count())
        .into_par_iter()
        .map(|t| {
            let list = &bins.lists[t];
            let mut local = vec![SplatGrad::<T>::default(); list.len()];
            let (x0, x1, y0, y1) = bins.tile_bounds(t);
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = y * width + x;
                    backward_pixel(output, adjoints, bins, list, splats, p, x as u32, y as u32, &mut local);
                }
            }
            local
        })
        .collect();

    let mut grads = vec![SplatGrad::<T>::default(); splats.len()];
    for (t, local) in partials.iter().enumerate() {
        for (k, g) in local.iter().enumerate() {
            grads[bins.lists[t][k] as usize].add(g);
        }
    }
    Ok(grads)
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn backward_pixel<T: Real>(
    output: &RenderOutput<T>,
    adjoints: &PixelAdjoints<T>,
    bins: &TileBins,
    list: &[u32],
    splats: &[ProjectedSplat<T>],
    p: usize,
    x: u32,
    y: u32,
    local: &mut [SplatGrad<T>],
) {
    let last = output.last_contributor[p] as usize;
    let d_color = [adjoints.color[3 * p], adjoints.color[3 * p + 1], adjoints.color[3 * p + 2]];
    let d_depth = adjoints.depth[p];
    let d_alpha = adjoints.alpha[p];
    if last == 0 {
        return;
    }
    let alpha_max = T::from_f64(ALPHA_MAX);
    let alpha_min = T::from_f64(ALPHA_MIN);
    let half = T::from_f64(0.5);
    let (px, py) = (T::from_f64(x as f64), T::from_f64(y as f64));
    let t_final = output.final_transmittance[p];

    let mut t = t_final;
    let mut behind = [
        output.background[0] * t_final,
        output.background[1] * t_final,
        output.background[2] * t_final,
    ];
    let mut behind_depth = T::ZERO;

    for k in (0..last).rev() {
        let si = list[k] as usize;
        match bins.boxes[si] {
            Some(b) if b.contains(x, y) => {}
            _ => continue,
        }
        let s = &splats[si];
        let (power, dx, dy) = gaussian_power(s, px, py);
        let g = power.exp();
        let raw_alpha = s.opacity * g;
        let clamped = raw_alpha > alpha_max;
        let alpha = raw_alpha.min(alpha_max);
        if alpha < alpha_min {
            continue;
        }
        let one_minus = T::ONE - alpha;
        let t_before = t / one_minus;
        let weight = alpha * t_before;

        let mut d_a = d_alpha * t_final / one_minus;
        for ch in 0..3 {
            d_a += d_color[ch] * (s.color[ch] * t_before - behind[ch] / one_minus);
        }
        d_a += d_depth * (s.view_depth * t_before - behind_depth / one_minus);

        let lg = &mut local[k];
        for ch in 0..3 {
            lg.color[ch] += d_color[ch] * weight;
            behind[ch] += s.color[ch] * weight;
        }
        lg.view_depth += d_depth * weight;
        behind_depth += s.view_depth * weight;
        t = t_before;

        if !clamped {
            lg.opacity += d_a * g;
            let d_power = d_a * s.opacity * g;
            lg.conic[0] += -(half * dx * dx) * d_power;
            lg.conic[1] += -(dx * dy) * d_power;
            lg.conic[2] += -(half * dy * dy) * d_power;
            lg.center[0] += (s.conic[0] * dx + s.conic[1] * dy) * d_power;
            lg.center[1] += (s.conic[1] * dx + s.conic[2] * dy) * d_power;
        }
    }
}
