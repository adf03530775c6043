//! Windowed SSIM with an analytic gradient.
//!
//! 11×11 Gaussian window (σ = 1.5), `C1 = 0.01²`, `C2 = 0.03²`, dynamic range 1.
//! Only window positions fully inside the image are used; the result is the
//! mean over positions and channels.

use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

struct Plane<'a> {
    data: &'a [f64],
    channel: usize,
}

impl Plane<'_> {
    #[inline]
    fn at(&self, width: usize, x: usize, y: usize) -> f64 {
        self.data[3 * (y * width + x) + self.channel]
    }
}

/// Valid separable convolution of a `width × height` plane.
fn conv_valid(src: &[f64], width: usize, height: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (width - SSIM_WINDOW + 1, height - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; ow * height];
    for y in 0..height {
        for x in 0..ow {
            let mut acc = 0.0;
            for k in 0..SSIM_WINDOW {
                acc += win[k] * src[y * width + x + k];
            }
            rows[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for k in 0..SSIM_WINDOW {
                acc += win[k] * rows[(y + k) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Transpose of [`conv_valid`]: scatters an `(w-10) × (h-10)` map back to `w × h`.
fn conv_valid_transpose(src: &[f64], width: usize, height: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (width - SSIM_WINDOW + 1, height - SSIM_WINDOW + 1);
    let mut cols = vec![0.0; ow * height];
    for y in 0..oh {
        for x in 0..ow {
            let v = src[y * ow + x];
            for k in 0..SSIM_WINDOW {
                cols[(y + k) * ow + x] += win[k] * v;
            }
        }
    }
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..ow {
            let v = cols[y * ow + x];
            for k in 0..SSIM_WINDOW {
                out[y * width + x + k] += win[k] * v;
            }
        }
    }
    out
}

fn check_dims(a: &[f64], b: &[f64], width: usize, height: usize) -> Result<()> {
    if a.len() != 3 * width * height || b.len() != a.len() {
        return Err(Error::DimensionMismatch(format!(
            "SSIM inputs of length {} and {} for a {width}x{height} RGB image",
            a.len(),
            b.len()
        )));
    }
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width,
            height,
            window: SSIM_WINDOW,
        });
    }
    Ok(())
}

/// Mean SSIM of two interleaved RGB images.
pub fn ssim(a: &[f64], b: &[f64], width: usize, height: usize) -> Result<f64> {
    ssim_impl(a, b, width, height, false).map(|(v, _)| v)
}

/// Mean SSIM and its gradient with respect to `a`.
pub fn ssim_with_grad(a: &[f64], b: &[f64], width: usize, height: usize) -> Result<(f64, Vec<f64>)> {
    ssim_impl(a, b, width, height, true).map(|(v, g)| (v, g.unwrap()))
}

fn ssim_impl(a: &[f64], b: &[f64], width: usize, height: usize, grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
    check_dims(a, b, width, height)?;
    let win = gaussian_window();
    let n = width * height;
    let positions = (width - SSIM_WINDOW + 1) * (height - SSIM_WINDOW + 1);
    let norm = 1.0 / (3 * positions) as f64;
    let mut total = 0.0;
    let mut gradient = grad.then(|| vec![0.0; 3 * n]);

    for ch in 0..3 {
        let (pa, pb) = (Plane { data: a, channel: ch }, Plane { data: b, channel: ch });
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        for py in 0..height {
            for px in 0..width {
                x[py * width + px] = pa.at(width, px, py);
                y[py * width + px] = pb.at(width, px, py);
            }
        }
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let mu_x = conv_valid(&x, width, height, &win);
        let mu_y = conv_valid(&y, width, height, &win);
        let m_xx = conv_valid(&xx, width, height, &win);
        let m_yy = conv_valid(&yy, width, height, &win);
        let m_xy = conv_valid(&xy, width, height, &win);

        let mut d_mu = vec![0.0; positions];
        let mut d_mxx = vec![0.0; positions];
        let mut d_mxy = vec![0.0; positions];
        for q in 0..positions {
            let (ux, uy) = (mu_x[q], mu_y[q]);
            let var_x = m_xx[q] - ux * ux;
            let var_y = m_yy[q] - uy * uy;
            let cov = m_xy[q] - ux * uy;
            let a1 = 2.0 * ux * uy + SSIM_C1;
            let a2 = 2.0 * cov + SSIM_C2;
            let b1 = ux * ux + uy * uy + SSIM_C1;
            let b2 = var_x + var_y + SSIM_C2;
            let s = (a1 * a2) / (b1 * b2);
            total += s;
            if grad {
                let den = b1 * b2;
                // S as a function of (μx, E[x²], E[xy]) with σ's expanded
                let ds_dvar = -s / b2;
                let ds_dcov = 2.0 * a1 / den;
                let ds_dmu_direct = (2.0 * uy * a2) / den - s * 2.0 * ux / b1;
                d_mu[q] = (ds_dmu_direct + ds_dvar * (-2.0 * ux) + ds_dcov * (-uy)) * norm;
                d_mxx[q] = ds_dvar * norm;
                d_mxy[q] = ds_dcov * norm;
            }
        }
        if let Some(g) = gradient.as_mut() {
            let t_mu = conv_valid_transpose(&d_mu, width, height, &win);
            let t_xx = conv_valid_transpose(&d_mxx, width, height, &win);
            let t_xy = conv_valid_transpose(&d_mxy, width, height, &win);
            for p in 0..n {
                g[3 * p + ch] = t_mu[p] + 2.0 * x[p] * t_xx[p] + y[p] * t_xy[p];
            }
        }
    }
    Ok((total * norm, gradient))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_normalized_and_symmetric() {
        let w = gaussian_window();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for k in 0..SSIM_WINDOW {
            assert_eq!(w[k], w[SSIM_WINDOW - 1 - k]);
        }
    }

    #[test]
    fn transpose_is_adjoint_of_convolution() {
        let (w, h) = (14, 12);
        let win = gaussian_window();
        let x: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 11) as f64 / 7.0).collect();
        let r: Vec<f64> = (0..(w - 10) * (h - 10)).map(|i| ((i * 17) % 5) as f64 - 2.0).collect();
        let lhs: f64 = conv_valid(&x, w, h, &win).iter().zip(&r).map(|(a, b)| a * b).sum();
        let rhs: f64 = conv_valid_transpose(&r, w, h, &win).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn too_small_is_an_error() {
        let a = vec![0.0; 3 * 10 * 20];
        assert!(matches!(ssim(&a, &a, 10, 20), Err(Error::ImageTooSmall { .. })));
        assert!(matches!(ssim(&a, &a[..3], 10, 20), Err(Error::DimensionMismatch(_))));
    }
}
