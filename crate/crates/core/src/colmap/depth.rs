//! Monocular depth priors: loading, validity masking and resampling.

use std::path::Path;

use crate::error::Result;
use crate::io::read_scalar_map;

/// Floor applied before inverting inverse-depth inputs.
pub const INVERT_EPS: f64 = 1e-6;

/// Depth grid with a validity mask, row-major from the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthPrior {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthPrior {
    /// Masks non-positive and non-finite values; invalid entries are stored as 0.
    pub fn from_values(width: usize, height: usize, raw: impl IntoIterator<Item = f64>) -> Self {
        let mut values = Vec::with_capacity(width * height);
        let mut valid = Vec::with_capacity(width * height);
        for v in raw {
            let ok = v.is_finite() && v > 0.0;
            values.push(if ok { v } else { 0.0 });
            valid.push(ok);
        }
        DepthPrior { width, height, values, valid }
    }

    /// Maps each valid value `v` to `1 / max(v, eps)`.
    pub fn inverted(mut self) -> Self {
        for (v, &ok) in self.values.iter_mut().zip(&self.valid) {
            if ok {
                *v = 1.0 / v.max(INVERT_EPS);
            }
        }
        self
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Bilinear resample to `width × height` under the same pixel-center
    /// alignment as a box downscale. An output pixel is valid only when all
    /// four source taps are valid.
    pub fn resized(&self, width: usize, height: usize) -> DepthPrior {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut values = vec![0.0; width * height];
        let mut valid = vec![false; width * height];
        let clampi = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let (y0, ty) = (clampi(fy.floor(), self.height), fy - fy.floor());
            let y1 = (y0 + 1).min(self.height - 1);
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let (x0, tx) = (clampi(fx.floor(), self.width), fx - fx.floor());
                let x1 = (x0 + 1).min(self.width - 1);
                let taps = [
                    (y0 * self.width + x0, (1.0 - tx) * (1.0 - ty)),
                    (y0 * self.width + x1, tx * (1.0 - ty)),
                    (y1 * self.width + x0, (1.0 - tx) * ty),
                    (y1 * self.width + x1, tx * ty),
                ];
                if taps.iter().all(|&(i, _)| self.valid[i]) {
                    let o = y * width + x;
                    values[o] = taps.iter().map(|&(i, w)| w * self.values[i]).sum();
                    valid[o] = values[o] > 0.0 && values[o].is_finite();
                }
            }
        }
        DepthPrior { width, height, values, valid }
    }
}

/// Loads a PFM or DPTH depth file and masks invalid pixels.
pub fn load_depth_map(path: &Path) -> Result<DepthPrior> {
    let map = read_scalar_map(path)?;
    Ok(DepthPrior::from_values(
        map.width,
        map.height,
        map.data.iter().map(|&v| v as f64),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_nan_and_zero() {
        let d = DepthPrior::from_values(2, 2, [1.0, f64::NAN, 0.0, 2.0]);
        assert_eq!(d.valid, vec![true, false, false, true]);
        assert_eq!(d.values[3], 2.0);
    }

    #[test]
    fn invert_maps_reciprocal() {
        let d = DepthPrior::from_values(3, 1, [2.0, 0.5, -1.0]).inverted();
        assert_eq!(d.values[..2], [0.5, 2.0]);
        assert!(!d.valid[2]);
    }

    #[test]
    fn resize_halves_constant_map() {
        let d = DepthPrior::from_values(4, 4, [3.0; 16]);
        let r = d.resized(2, 2);
        assert!(r.valid.iter().all(|&v| v));
        assert!(r.values.iter().all(|&v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn resize_erodes_invalid_neighbourhood() {
        let mut raw = [1.0; 16];
        raw[5] = f64::NAN;
        let r = DepthPrior::from_values(4, 4, raw).resized(2, 2);
        // source sample for output (0,0) is (0.5,0.5): taps (0..1, 0..1) include pixel 5
        assert!(!r.valid[0]);
        assert!(r.valid[3]);
    }
}
