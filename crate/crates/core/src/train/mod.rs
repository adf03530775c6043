//! Optimization loop: view cycling, render, loss, backward, Adam, density
//! control, evaluation and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod metrics_log;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::{OptimizerState, ParamRow};
pub use checkpoint::{checkpoint_paths, sidecar_for, Checkpoint};
pub use config::{AdamConfig, LearningRates, TrainConfig};
pub use metrics_log::{MetricsRow, METRICS_HEADER};

use crate::colmap::{DatasetSplit, TestView, TrainView};
use crate::density::{accumulate_stats, apply_retention, densify, reset_opacity};
use crate::error::{Error, Result};
use crate::losses::{total_loss, LossBundle};
use crate::metrics::{evaluate, EvalReport};
use crate::real::{Precision, Real};
use crate::render::{render, render_backward, PixelAdjoints};
use crate::scene::{CloudGrads, GaussianCloud};

const STREAM_VIEW_ORDER: u64 = 1;
const STREAM_SPLIT: u64 = 2;

/// Deterministic RNG for `(seed, purpose, index)`.
pub fn derived_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 48) ^ index);
    rng
}

/// Training view shown at 1-based iteration `iter`: each cycle over the
/// views is an independent seeded shuffle.
pub fn view_for_iteration(seed: u64, n_views: usize, iter: usize) -> usize {
    let k = iter - 1;
    let (cycle, pos) = (k / n_views, k % n_views);
    let mut order: Vec<usize> = (0..n_views).collect();
    order.shuffle(&mut derived_rng(seed, STREAM_VIEW_ORDER, cycle as u64));
    order[pos]
}

/// Divides each prior by its median valid value (lower median for even counts)
/// and rounds to `f32`, which absorbs the last-bit residue of a global scale.
pub fn normalize_prior(view: &mut TrainView) {
    let mut vals: Vec<f64> = view
        .prior_depth
        .iter()
        .zip(&view.valid_mask)
        .filter(|(_, &ok)| ok)
        .map(|(&v, _)| v)
        .collect();
    if vals.is_empty() {
        return;
    }
    let mid = (vals.len() - 1) / 2;
    let (_, m, _) = vals.select_nth_unstable_by(mid, f64::total_cmp);
    let m = *m;
    if m > 0.0 && m.is_finite() {
        for (v, &ok) in view.prior_depth.iter_mut().zip(&view.valid_mask) {
            if ok {
                *v = (*v / m) as f32 as f64;
            }
        }
    }
}

/// Result of one optimization step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub loss: LossBundle,
    pub grads: CloudGrads,
}

fn step_with<T: Real>(
    cloud: &mut GaussianCloud,
    opt: &mut OptimizerState,
    view: &TrainView,
    config: &TrainConfig,
    iter: usize,
) -> Result<StepOutput> {
    let out = render::<T>(cloud, &view.camera, config.background);
    let loss = total_loss(&out, view, &config.loss_weights())?;
    if !loss.total.is_finite() {
        return Err(Error::NonFiniteLoss {
            iteration: iter,
            detail: format!(
                "view {}: l1={} d_ssim={} depth={} total={} ({} gaussians)",
                view.name,
                loss.l1,
                loss.d_ssim,
                loss.depth,
                loss.total,
                cloud.len()
            ),
        });
    }
    let zeros = vec![0.0; out.pixel_count()];
    let adjoints = PixelAdjoints::<T>::from_f64(&loss.d_color, &loss.d_depth, &zeros);
    let grads = render_backward(cloud, &view.camera, &out, &adjoints)?;
    if !grads.all_finite() {
        let bad = (0..grads.len()).filter(|&i| !grads.flat(i).iter().all(|v| v.is_finite())).count();
        return Err(Error::NonFiniteLoss {
            iteration: iter,
            detail: format!("view {}: {bad} gaussians received non-finite gradients", view.name),
        });
    }
    let position_lr = config
        .lr
        .position(iter - 1, config.iterations, cloud.scene_extent);
    let rates = adam::rate_row(&config.lr, position_lr, config.sh_degree);
    opt.update(cloud, &grads, &rates, &config.adam);
    Ok(StepOutput { loss, grads })
}

/// Render, loss, backward and Adam update for one view at 1-based `iter`.
pub fn train_step(
    cloud: &mut GaussianCloud,
    opt: &mut OptimizerState,
    view: &TrainView,
    config: &TrainConfig,
    iter: usize,
) -> Result<StepOutput> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud("cannot train an empty cloud".into()));
    }
    match config.precision {
        Precision::F32 => step_with::<f32>(cloud, opt, view, config, iter),
        Precision::F64 => step_with::<f64>(cloud, opt, view, config, iter),
    }
}

/// Owns the optimization state of one run.
pub struct Trainer {
    pub cloud: GaussianCloud,
    pub optimizer: OptimizerState,
    pub config: TrainConfig,
    /// Number of completed iterations.
    pub iteration: usize,
    pub history: Vec<MetricsRow>,
    train: Vec<TrainView>,
    test: Vec<TestView>,
}

impl Trainer {
    pub fn new(cloud: GaussianCloud, split: DatasetSplit, config: TrainConfig) -> Result<Trainer> {
        let optimizer = OptimizerState::new(cloud.len());
        Trainer::resume(
            Checkpoint {
                iteration: 0,
                cloud,
                optimizer,
            },
            split,
            config,
        )
    }

    pub fn resume(ckpt: Checkpoint, split: DatasetSplit, config: TrainConfig) -> Result<Trainer> {
        config.validate()?;
        if split.train.is_empty() {
            return Err(Error::NotEnoughViews { needed: 1, found: 0 });
        }
        if ckpt.optimizer.len() != ckpt.cloud.len() {
            return Err(Error::MismatchedIntermediates(format!(
                "checkpoint has {} gaussians but {} optimizer rows",
                ckpt.cloud.len(),
                ckpt.optimizer.len()
            )));
        }
        let mut train = split.train;
        for v in &mut train {
            v.check()?;
            if config.normalize_prior {
                normalize_prior(v);
            }
        }
        Ok(Trainer {
            cloud: ckpt.cloud,
            optimizer: ckpt.optimizer,
            config,
            iteration: ckpt.iteration,
            history: Vec::new(),
            train,
            test: split.test,
        })
    }

    pub fn train_views(&self) -> &[TrainView] {
        &self.train
    }

    pub fn test_views(&self) -> &[TestView] {
        &self.test
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            iteration: self.iteration,
            cloud: self.cloud.clone(),
            optimizer: self.optimizer.clone(),
        }
    }

    pub fn evaluate(&self) -> Result<EvalReport> {
        evaluate(&self.cloud, &self.test, self.config.background)
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.config.iterations
    }

    /// Runs the next iteration, including density control and scheduled
    /// evaluation.
    pub fn step(&mut self) -> Result<MetricsRow> {
        let iter = self.iteration + 1;
        let started = self.config.timing.then(Instant::now);
        let view_idx = view_for_iteration(self.config.seed, self.train.len(), iter);
        let out = train_step(
            &mut self.cloud,
            &mut self.optimizer,
            &self.train[view_idx],
            &self.config,
            iter,
        )?;
        let dc = &self.config.densify;
        if iter < dc.stop_iter {
            accumulate_stats(&mut self.cloud, &out.grads);
        }
        if dc.is_densify_step(iter) {
            let report = densify(&mut self.cloud, dc, derived_rng(self.config.seed, STREAM_SPLIT, iter as u64).next_seed());
            let retained = apply_retention(&mut self.cloud, &self.config.retention);
            self.optimizer.remap(&report.remap.then(&retained));
        } else {
            let retained = crate::density::safety_cull(&mut self.cloud);
            if !retained.is_identity() {
                self.optimizer.remap(&retained);
            }
        }
        if reset_opacity(&mut self.cloud, &self.config.retention, iter) {
            self.optimizer.reset_opacity_moments();
        }
        self.iteration = iter;
        let eval = if !self.test.is_empty()
            && ((self.config.eval_interval > 0 && iter % self.config.eval_interval == 0) || iter == self.config.iterations)
        {
            Some(self.evaluate()?)
        } else {
            None
        };
        let row = MetricsRow {
            iter,
            l1: out.loss.l1,
            d_ssim: out.loss.d_ssim,
            depth: out.loss.depth,
            total: out.loss.total,
            test_psnr: eval.as_ref().map(|e| e.mean_psnr),
            test_ssim: eval.as_ref().map(|e| e.mean_ssim),
            gaussian_count: self.cloud.len(),
            wall_ms: started.map(|t| t.elapsed().as_secs_f64() * 1e3),
        };
        self.history.push(row.clone());
        Ok(row)
    }

    /// Steps until `config.iterations`, calling `on_step` after each one.
    pub fn run(&mut self, mut on_step: impl FnMut(&Trainer, &MetricsRow) -> Result<()>) -> Result<()> {
        while !self.is_done() {
            let row = self.step()?;
            on_step(self, &row)?;
        }
        Ok(())
    }
}

trait NextSeed {
    fn next_seed(self) -> u64;
}

impl NextSeed for ChaCha8Rng {
    fn next_seed(mut self) -> u64 {
        rand::Rng::random(&mut self)
    }
}
