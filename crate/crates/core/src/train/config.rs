use serde::{Deserialize, Serialize};

use crate::density::{DensifyConfig, RetentionPolicy};
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::real::Precision;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    /// Initial position rate, multiplied by the scene extent.
    pub position_init: f64,
    /// Final position rate, multiplied by the scene extent.
    pub position_final: f64,
    pub sh_dc: f64,
    pub sh_rest: f64,
    pub opacity: f64,
    pub log_scale: f64,
    pub rotation: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        LearningRates {
            position_init: 1.6e-4,
            position_final: 1.6e-6,
            sh_dc: 2.5e-3,
            sh_rest: 2.5e-3 / 20.0,
            opacity: 5e-2,
            log_scale: 5e-3,
            rotation: 1e-3,
        }
    }
}

impl LearningRates {
    pub fn zero() -> Self {
        LearningRates {
            position_init: 0.0,
            position_final: 0.0,
            sh_dc: 0.0,
            sh_rest: 0.0,
            opacity: 0.0,
            log_scale: 0.0,
            rotation: 0.0,
        }
    }

    /// Position rate at `iter` of `iterations`: log-linear between the
    /// initial and final values, scaled by `extent`.
    pub fn position(&self, iter: usize, iterations: usize, extent: f64) -> f64 {
        if self.position_init <= 0.0 || self.position_final <= 0.0 {
            return 0.0;
        }
        let t = if iterations == 0 {
            0.0
        } else {
            (iter as f64 / iterations as f64).clamp(0.0, 1.0)
        };
        let ln = (1.0 - t) * self.position_init.ln() + t * self.position_final.ln();
        ln.exp() * extent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub lambda: f64,
    pub lambda_depth: f64,
    /// Minimum accumulated alpha for depth supervision.
    pub alpha_min: f64,
    pub sh_degree: u32,
    pub seed: u64,
    pub background: [f64; 3],
    pub resolution_divisor: usize,
    pub checkpoint_interval: usize,
    pub eval_interval: usize,
    /// Divide each prior depth map by its median valid value before training.
    pub normalize_prior: bool,
    /// Record per-iteration wall time in the metrics log.
    pub timing: bool,
    pub precision: Precision,
    pub lr: LearningRates,
    pub adam: AdamConfig,
    pub densify: DensifyConfig,
    pub retention: RetentionPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 10_000,
            lambda: 0.2,
            lambda_depth: 0.005,
            alpha_min: 0.5,
            sh_degree: 1,
            seed: 0,
            background: [0.0; 3],
            resolution_divisor: 1,
            checkpoint_interval: 1000,
            eval_interval: 1000,
            normalize_prior: true,
            timing: false,
            precision: Precision::F64,
            lr: LearningRates::default(),
            adam: AdamConfig::default(),
            densify: DensifyConfig::default(),
            retention: RetentionPolicy::RetainAll,
        }
    }
}

impl TrainConfig {
    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda: self.lambda,
            lambda_depth: self.lambda_depth,
            alpha_min: self.alpha_min,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if !(self.lambda_depth >= 0.0 && self.lambda_depth.is_finite()) {
            return bad(format!("lambda_depth {} must be finite and ≥ 0", self.lambda_depth));
        }
        if self.sh_degree > 1 {
            return bad(format!("sh_degree {} unsupported (0 or 1)", self.sh_degree));
        }
        if self.resolution_divisor == 0 {
            return bad("resolution_divisor must be ≥ 1".into());
        }
        if !(0.0..=1.0).contains(&self.alpha_min) {
            return bad(format!("alpha_min {} outside [0, 1]", self.alpha_min));
        }
        let lr = &self.lr;
        let rates = [
            lr.position_init,
            lr.position_final,
            lr.sh_dc,
            lr.sh_rest,
            lr.opacity,
            lr.log_scale,
            lr.rotation,
        ];
        if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return bad(format!("learning rates must be finite and ≥ 0: {lr:?}"));
        }
        let a = &self.adam;
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return bad(format!("invalid Adam parameters {a:?}"));
        }
        if self.background.iter().any(|c| !c.is_finite()) {
            return bad("background must be finite".into());
        }
        self.densify.validate()
    }
}
