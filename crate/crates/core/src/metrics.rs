//! Image-quality metrics and test-set evaluation.

use rayon::prelude::*;
use serde::Serialize;

use crate::colmap::TestView;
use crate::error::{Error, Result};
use crate::render::render;
use crate::scene::GaussianCloud;

/// Reported PSNR for identical images.
pub const PSNR_CAP: f64 = 100.0;

/// `10·log10(1/MSE)` over all pixel-channels, capped at [`PSNR_CAP`].
pub fn psnr(rendered: &[f64], target: &[f64]) -> Result<f64> {
    if rendered.len() != target.len() {
        return Err(Error::DimensionMismatch(format!(
            "psnr inputs: {} vs {} values",
            rendered.len(),
            target.len()
        )));
    }
    if rendered.is_empty() {
        return Ok(PSNR_CAP);
    }
    let mse = rendered.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / rendered.len() as f64;
    if mse <= 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

pub use crate::ssim::ssim;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewMetrics {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub views: Vec<ViewMetrics>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    /// Averages over extrapolated views only; `None` when there are none.
    pub extrapolated_psnr: Option<f64>,
    pub extrapolated_ssim: Option<f64>,
}

impl EvalReport {
    pub fn from_views(views: Vec<ViewMetrics>) -> Self {
        fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
            let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
            (n > 0).then(|| s / n as f64)
        }
        let extrap = || views.iter().filter(|v| v.extrapolated);
        EvalReport {
            mean_psnr: mean(views.iter().map(|v| v.psnr)).unwrap_or(f64::NAN),
            mean_ssim: mean(views.iter().map(|v| v.ssim)).unwrap_or(f64::NAN),
            extrapolated_psnr: mean(extrap().map(|v| v.psnr)),
            extrapolated_ssim: mean(extrap().map(|v| v.ssim)),
            views,
        }
    }

    /// Plain-text table: one row per view plus the two averages.
    pub fn table(&self) -> String {
        let mut s = format!("{:<24} {:>9} {:>8} {:>6}\n", "view", "PSNR", "SSIM", "extrap");
        for v in &self.views {
            s += &format!(
                "{:<24} {:>9.3} {:>8.4} {:>6}\n",
                v.name,
                v.psnr,
                v.ssim,
                if v.extrapolated { "yes" } else { "no" }
            );
        }
        s += &format!("{:<24} {:>9.3} {:>8.4}\n", "mean (all)", self.mean_psnr, self.mean_ssim);
        if let (Some(p), Some(q)) = (self.extrapolated_psnr, self.extrapolated_ssim) {
            s += &format!("{:<24} {:>9.3} {:>8.4}\n", "mean (extrapolated)", p, q);
        }
        s
    }

    /// CSV with columns `view,psnr,ssim,extrapolated,lpips` (LPIPS left empty
    /// for externally computed values).
    pub fn csv(&self) -> String {
        let mut s = String::from("view,psnr,ssim,extrapolated,lpips\n");
        for v in &self.views {
            s += &format!("{},{},{},{},\n", v.name, v.psnr, v.ssim, v.extrapolated as u8);
        }
        s += &format!("mean,{},{},,\n", self.mean_psnr, self.mean_ssim);
        if let (Some(p), Some(q)) = (self.extrapolated_psnr, self.extrapolated_ssim) {
            s += &format!("mean_extrapolated,{p},{q},1,\n");
        }
        s
    }
}

/// Color clamped to the displayable range.
pub fn display_clamp(color: &[f64]) -> Vec<f64> {
    color.iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// Renders every test view and aggregates PSNR/SSIM.
pub fn evaluate(cloud: &GaussianCloud, views: &[TestView], background: [f64; 3]) -> Result<EvalReport> {
    let rows = views
        .par_iter()
        .map(|v| {
            let out = render::<f64>(cloud, &v.camera, background);
            let color = display_clamp(&out.color);
            Ok(ViewMetrics {
                name: v.name.clone(),
                psnr: psnr(&color, &v.image.data)?,
                ssim: ssim(&color, &v.image.data, v.camera.width, v.camera.height)?,
                extrapolated: v.extrapolated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_views(rows))
}
