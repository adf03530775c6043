//! Adam over the flat per-Gaussian parameter layout.

use serde::{Deserialize, Serialize};

use super::config::{AdamConfig, LearningRates};
use crate::density::Remap;
use crate::scene::{CloudGrads, GaussianCloud, ParamKind, PARAMS_PER_GAUSSIAN};

pub type ParamRow = [f64; PARAMS_PER_GAUSSIAN];

/// First and second moments, index-aligned with the cloud.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<ParamRow>,
    pub v: Vec<ParamRow>,
    pub step: u64,
}

/// Learning rate per flat parameter slot.
pub fn rate_row(lr: &LearningRates, position_lr: f64, sh_degree: u32) -> ParamRow {
    std::array::from_fn(|k| match ParamKind::from_flat(k) {
        ParamKind::Position(_) => position_lr,
        ParamKind::LogScale(_) => lr.log_scale,
        ParamKind::Rotation(_) => lr.rotation,
        ParamKind::OpacityLogit => lr.opacity,
        ParamKind::Sh(j) if j % 4 == 0 => lr.sh_dc,
        ParamKind::Sh(_) if sh_degree >= 1 => lr.sh_rest,
        ParamKind::Sh(_) => 0.0,
    })
}

/// One Adam update of a single scalar; returns the new parameter value.
#[inline]
pub fn adam_scalar(p: f64, g: f64, m: &mut f64, v: &mut f64, lr: f64, cfg: &AdamConfig, bc1: f64, bc2: f64) -> f64 {
    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
    let m_hat = *m / bc1;
    let v_hat = *v / bc2;
    p - lr * m_hat / (v_hat.sqrt() + cfg.eps)
}

impl OptimizerState {
    pub fn new(n: usize) -> Self {
        OptimizerState {
            m: vec![[0.0; PARAMS_PER_GAUSSIAN]; n],
            v: vec![[0.0; PARAMS_PER_GAUSSIAN]; n],
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Re-aligns moments after densification; new elements start at zero.
    pub fn remap(&mut self, remap: &Remap) {
        let zero = [0.0; PARAMS_PER_GAUSSIAN];
        self.m = remap.apply(&self.m, zero);
        self.v = remap.apply(&self.v, zero);
    }

    pub fn reset_opacity_moments(&mut self) {
        for (m, v) in self.m.iter_mut().zip(self.v.iter_mut()) {
            m[10] = 0.0;
            v[10] = 0.0;
        }
    }

    /// Bias-corrected Adam step on every parameter of the cloud.
    pub fn update(&mut self, cloud: &mut GaussianCloud, grads: &CloudGrads, rates: &ParamRow, cfg: &AdamConfig) {
        assert_eq!(cloud.len(), self.len(), "optimizer state out of sync with cloud");
        assert_eq!(cloud.len(), grads.len(), "gradients out of sync with cloud");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for i in 0..cloud.len() {
            let g = grads.flat(i);
            let mut gauss = cloud.get(i);
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for k in 0..PARAMS_PER_GAUSSIAN {
                let kind = ParamKind::from_flat(k);
                let p = gauss.param_mut(kind);
                *p = adam_scalar(*p, g[k], &mut m[k], &mut v[k], rates[k], cfg, bc1, bc2);
            }
            cloud.set(i, gauss);
        }
    }
}
