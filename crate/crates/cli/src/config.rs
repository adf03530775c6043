//! Run configuration: built-in defaults, overlaid by a TOML file, overlaid by
//! command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use depthsplat_core::colmap::split::{DEFAULT_TEST_VIEWS, DEFAULT_TRAIN_VIEWS};
use depthsplat_core::colmap::IngestOptions;
use depthsplat_core::density::RetentionPolicy;
use depthsplat_core::train::TrainConfig;
use depthsplat_core::Precision;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            n_train: DEFAULT_TRAIN_VIEWS,
            n_test: DEFAULT_TEST_VIEWS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthConfig {
    /// Treat depth files as inverse depth and map `v → 1/max(v, 1e-6)`.
    pub invert: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub train: TrainConfig,
    pub split: SplitConfig,
    pub depth: DepthConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serializing config")
    }

    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            resolution_divisor: self.train.resolution_divisor,
            invert_depth: self.depth.invert,
            format: None,
            n_train: self.split.n_train,
            n_test: self.split.n_test,
        }
    }

    pub fn dataset(&self) -> Result<&Path> {
        match &self.dataset {
            Some(d) if d.is_dir() => Ok(d),
            Some(d) => bail!("dataset directory {} does not exist", d.display()),
            None => bail!("no dataset given (use --dataset or `dataset = ...` in the config)"),
        }
    }

    pub fn out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .context("no output directory given (use --out or `out = ...` in the config)")
    }
}

/// Flags shared by commands that resolve a [`RunConfig`].
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory with `images/`, `sparse/0/` and `depth/`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Weight of D-SSIM in the photometric loss.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Weight of the scale-invariant depth loss.
    #[arg(long)]
    pub lambda_depth: Option<f64>,
    /// Same as `--lambda-depth 0`.
    #[arg(long, conflicts_with = "lambda_depth")]
    pub no_depth_loss: bool,
    #[arg(long)]
    pub sh_degree: Option<u32>,
    #[arg(long)]
    pub resolution_divisor: Option<usize>,
    /// Depth files hold inverse depth.
    #[arg(long)]
    pub invert_depth: bool,
    /// Keep every splat (no opacity pruning or reset). This is the default.
    #[arg(long, conflicts_with = "prune")]
    pub retain_all: bool,
    /// Baseline retention: prune low-opacity splats and reset opacities.
    #[arg(long)]
    pub prune: bool,
    #[arg(long)]
    pub checkpoint_interval: Option<usize>,
    #[arg(long)]
    pub eval_interval: Option<usize>,
    /// Record per-iteration wall time in the metrics log.
    #[arg(long)]
    pub timing: bool,
}

impl ConfigFlags {
    /// Defaults, then the config file, then `SPLAT_PRECISION`, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = precision_from_env()? {
            cfg.train.precision = p;
        }
        self.apply(&mut cfg);
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(d) = &self.dataset {
            cfg.dataset = Some(d.clone());
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        let t = &mut cfg.train;
        if let Some(v) = self.seed {
            t.seed = v;
        }
        if let Some(v) = self.iterations {
            t.iterations = v;
        }
        if let Some(v) = self.lambda {
            t.lambda = v;
        }
        if let Some(v) = self.lambda_depth {
            t.lambda_depth = v;
        }
        if self.no_depth_loss {
            t.lambda_depth = 0.0;
        }
        if let Some(v) = self.sh_degree {
            t.sh_degree = v;
        }
        if let Some(v) = self.resolution_divisor {
            t.resolution_divisor = v;
        }
        if let Some(v) = self.checkpoint_interval {
            t.checkpoint_interval = v;
        }
        if let Some(v) = self.eval_interval {
            t.eval_interval = v;
        }
        if self.timing {
            t.timing = true;
        }
        if self.prune {
            t.retention = RetentionPolicy::baseline_prune();
        }
        if self.retain_all {
            t.retention = RetentionPolicy::RetainAll;
        }
        if self.invert_depth {
            cfg.depth.invert = true;
        }
    }
}

pub fn precision_from_env() -> Result<Option<Precision>> {
    match std::env::var("SPLAT_PRECISION") {
        Ok(v) if !v.is_empty() => Ok(Some(v.parse().map_err(anyhow::Error::msg)?)),
        _ => Ok(None),
    }
}

/// Sizes the global rayon pool from `SPLAT_THREADS`.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SPLAT_THREADS") {
        if v.is_empty() {
            return Ok(());
        }
        let n: usize = v
            .parse()
            .with_context(|| format!("SPLAT_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            bail!("SPLAT_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    Ok(())
}
