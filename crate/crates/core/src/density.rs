//! Adaptive density control: gradient-driven clone/split plus the
//! retention policy applied afterwards.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::gaussian::{logit, rotation_matrix, sigmoid};
use crate::scene::{CloudGrads, GaussianCloud};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensifyConfig {
    pub grad_threshold: f64,
    /// Clone/split boundary as a fraction of the scene extent.
    pub percent_dense: f64,
    pub interval: usize,
    pub start_iter: usize,
    pub stop_iter: usize,
    pub split_factor: f64,
    pub split_count: usize,
}

impl Default for DensifyConfig {
    fn default() -> Self {
        DensifyConfig {
            grad_threshold: 2e-4,
            percent_dense: 0.01,
            interval: 100,
            start_iter: 500,
            stop_iter: 5000,
            split_factor: 1.6,
            split_count: 2,
        }
    }
}

impl DensifyConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.grad_threshold > 0.0
            && self.percent_dense > 0.0
            && self.interval > 0
            && self.split_factor > 0.0
            && self.split_count > 0;
        if !positive {
            return Err(Error::InvalidConfig(format!("densify parameters must be positive: {self:?}")));
        }
        if self.start_iter >= self.stop_iter {
            return Err(Error::InvalidConfig(format!(
                "densify start_iter {} must be below stop_iter {}",
                self.start_iter, self.stop_iter
            )));
        }
        Ok(())
    }

    /// Whether densification runs after iteration `iter` (1-based).
    pub fn is_densify_step(&self, iter: usize) -> bool {
        iter >= self.start_iter && iter < self.stop_iter && iter % self.interval == 0
    }
}

/// What happens to low-opacity splats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum RetentionPolicy {
    /// Keep every splat; only non-finite Gaussians are removed.
    RetainAll,
    /// Baseline behaviour: prune below `min_opacity` at densify steps and
    /// periodically reset opacities.
    Prune {
        min_opacity: f64,
        reset_interval: usize,
        reset_opacity: f64,
    },
}

impl Default for RetentionPolicy {
    fn default() -> Self {
        RetentionPolicy::RetainAll
    }
}

impl RetentionPolicy {
    pub fn baseline_prune() -> Self {
        RetentionPolicy::Prune {
            min_opacity: 0.005,
            reset_interval: 3000,
            reset_opacity: 0.01,
        }
    }
}

/// How the arrays were rearranged: `remap[new] = Some(old)` for carried-over
/// Gaussians and `None` for newly created ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Remap {
    pub remap: Vec<Option<usize>>,
}

impl Remap {
    pub fn identity(n: usize) -> Self {
        Remap {
            remap: (0..n).map(Some).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.remap.iter().enumerate().all(|(i, r)| *r == Some(i))
    }

    /// Composition: apply `self`, then `next`.
    pub fn then(&self, next: &Remap) -> Remap {
        Remap {
            remap: next.remap.iter().map(|r| r.and_then(|i| self.remap[i])).collect(),
        }
    }

    /// Rebuilds a per-Gaussian array, filling new slots with `fill`.
    pub fn apply<T: Clone>(&self, old: &[T], fill: T) -> Vec<T> {
        self.remap
            .iter()
            .map(|r| r.map_or_else(|| fill.clone(), |i| old[i].clone()))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DensifyReport {
    pub cloned: usize,
    pub split: usize,
    pub removed: usize,
    pub remap: Remap,
}

/// Adds one backward pass's view-space gradient norms to the running stats of
/// the Gaussians that were visible.
pub fn accumulate_stats(cloud: &mut GaussianCloud, grads: &CloudGrads) {
    let stats = &mut cloud.densify_stats;
    for i in 0..grads.len().min(stats.grad_sum.len()) {
        if grads.visible[i] {
            stats.grad_sum[i] += grads.view_space_norms[i];
            stats.count[i] += 1;
        }
    }
}

/// Clones small and splits large Gaussians whose mean view-space gradient
/// reaches the threshold, then resets the stats.
///
/// Output order: kept originals, clones, split children.
pub fn densify(cloud: &mut GaussianCloud, config: &DensifyConfig, seed: u64) -> DensifyReport {
    let n = cloud.len();
    let size_limit = config.percent_dense * cloud.scene_extent;
    let mut clone_src = Vec::new();
    let mut split_src = Vec::new();
    for i in 0..n {
        if cloud.densify_stats.mean(i) < config.grad_threshold {
            continue;
        }
        let max_scale = cloud.log_scales[i].iter().copied().fold(f64::NEG_INFINITY, f64::max).exp();
        if max_scale < size_limit {
            clone_src.push(i);
        } else {
            split_src.push(i);
        }
    }
    if clone_src.is_empty() && split_src.is_empty() {
        cloud.densify_stats.reset();
        return DensifyReport {
            remap: Remap::identity(n),
            ..Default::default()
        };
    }
    let mut is_split = vec![false; n];
    for &i in &split_src {
        is_split[i] = true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shrink = config.split_factor.ln();
    let mut children = Vec::with_capacity(split_src.len() * config.split_count);
    for &i in &split_src {
        let parent = cloud.get(i);
        let rot = rotation_matrix(parent.rotation);
        let scale = parent.log_scale.map(f64::exp);
        for _ in 0..config.split_count {
            let z: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let local = nalgebra::Vector3::new(scale[0] * z[0], scale[1] * z[1], scale[2] * z[2]);
            let offset = rot * local;
            let mut child = parent;
            for k in 0..3 {
                child.position[k] += offset[k];
                child.log_scale[k] -= shrink;
            }
            children.push(child);
        }
    }
    let old = std::mem::replace(cloud, GaussianCloud::new(cloud.scene_extent));
    let mut remap = Vec::with_capacity(n - split_src.len() + clone_src.len() + children.len());
    for i in (0..n).filter(|&i| !is_split[i]) {
        cloud.push(old.get(i));
        remap.push(Some(i));
    }
    for &i in &clone_src {
        cloud.push(old.get(i));
        remap.push(None);
    }
    for c in children {
        cloud.push(c);
        remap.push(None);
    }
    log::debug!(
        "densify: cloned {}, split {} -> {} gaussians",
        clone_src.len(),
        split_src.len(),
        cloud.len()
    );
    DensifyReport {
        cloned: clone_src.len(),
        split: split_src.len(),
        removed: split_src.len(),
        remap: Remap { remap },
    }
}

/// Removes Gaussians with non-finite parameters, logging each one.
pub fn safety_cull(cloud: &mut GaussianCloud) -> Remap {
    let keep: Vec<bool> = cloud.iter().map(|g| g.is_finite()).collect();
    remove_unkept(cloud, &keep, "non-finite parameters")
}

fn remove_unkept(cloud: &mut GaussianCloud, keep: &[bool], reason: &str) -> Remap {
    let removed = keep.iter().filter(|k| !**k).count();
    if removed == 0 {
        return Remap::identity(cloud.len());
    }
    for (i, _) in keep.iter().enumerate().filter(|(_, k)| !**k) {
        log::warn!("removing gaussian {i}: {reason}");
    }
    let remap = Remap {
        remap: (0..keep.len()).filter(|&i| keep[i]).map(Some).collect(),
    };
    cloud.retain_mask(keep);
    remap
}

/// Applies the retention policy after a densify step. Under
/// [`RetentionPolicy::RetainAll`] only the safety cull runs.
pub fn apply_retention(cloud: &mut GaussianCloud, policy: &RetentionPolicy) -> Remap {
    let cull = safety_cull(cloud);
    match *policy {
        RetentionPolicy::RetainAll => cull,
        RetentionPolicy::Prune { min_opacity, .. } => {
            let keep: Vec<bool> = cloud.opacity_logits.iter().map(|&l| sigmoid(l) >= min_opacity).collect();
            let pruned = remove_unkept(cloud, &keep, "opacity below prune threshold");
            cull.then(&pruned)
        }
    }
}

/// Opacity reset of the pruning baseline: caps every opacity at
/// `reset_opacity`. Returns true when a reset happened, in which case the
/// caller clears the opacity optimizer moments.
pub fn reset_opacity(cloud: &mut GaussianCloud, policy: &RetentionPolicy, iter: usize) -> bool {
    match *policy {
        RetentionPolicy::Prune {
            reset_interval,
            reset_opacity,
            ..
        } if reset_interval > 0 && iter > 0 && iter % reset_interval == 0 => {
            let cap = logit(reset_opacity);
            for l in cloud.opacity_logits.iter_mut() {
                *l = l.min(cap);
            }
            true
        }
        _ => false,
    }
}
