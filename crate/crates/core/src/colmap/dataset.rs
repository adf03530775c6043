//! Dataset directory loading: `images/`, `sparse/0/`, `depth/`.

use std::path::{Path, PathBuf};

use super::depth::{load_depth_map, DepthPrior};
use super::model::{detect_format, parse_sparse_model, ModelFormat, SparseModel};
use super::split::{uniform_split, SplitIndices, DEFAULT_TEST_VIEWS, DEFAULT_TRAIN_VIEWS};
use crate::error::{Error, Result};
use crate::io::{load_image, ColorImage};
use crate::scene::CameraModel;

/// A supervised training view at training resolution.
#[derive(Debug, Clone)]
pub struct TrainView {
    pub name: String,
    pub camera: CameraModel,
    pub image: ColorImage,
    /// Prior depth, positive where `valid_mask` is set and 0 elsewhere.
    pub prior_depth: Vec<f64>,
    pub valid_mask: Vec<bool>,
}

impl TrainView {
    pub fn check(&self) -> Result<()> {
        let n = self.camera.pixel_count();
        if self.image.width != self.camera.width
            || self.image.height != self.camera.height
            || self.prior_depth.len() != n
            || self.valid_mask.len() != n
        {
            return Err(Error::DimensionMismatch(format!(
                "view {}: camera {}x{}, image {}x{}, depth {} / mask {} values",
                self.name,
                self.camera.width,
                self.camera.height,
                self.image.width,
                self.image.height,
                self.prior_depth.len(),
                self.valid_mask.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| self.valid_mask[i] && !(self.prior_depth[i] > 0.0)) {
            return Err(Error::DegenerateParameter(format!(
                "view {}: valid prior depth {} at pixel {i}",
                self.name, self.prior_depth[i]
            )));
        }
        Ok(())
    }
}

/// A held-out view; `extrapolated` marks views outside the training coverage.
#[derive(Debug, Clone)]
pub struct TestView {
    pub name: String,
    pub camera: CameraModel,
    pub image: ColorImage,
    pub extrapolated: bool,
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<TrainView>,
    pub test: Vec<TestView>,
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub resolution_divisor: usize,
    pub invert_depth: bool,
    /// `None` auto-detects (binary preferred).
    pub format: Option<ModelFormat>,
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            resolution_divisor: 1,
            invert_depth: false,
            format: None,
            n_train: DEFAULT_TRAIN_VIEWS,
            n_test: DEFAULT_TEST_VIEWS,
        }
    }
}

/// One registered image with its full-resolution camera.
#[derive(Debug, Clone)]
pub struct ViewEntry {
    pub name: String,
    pub image_id: u32,
    pub camera: CameraModel,
}

/// A parsed dataset directory with views sorted by image name.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub model: SparseModel,
    pub views: Vec<ViewEntry>,
}

impl Dataset {
    pub fn open(root: &Path, format: Option<ModelFormat>) -> Result<Dataset> {
        let sparse = root.join("sparse").join("0");
        let format = match format {
            Some(f) => f,
            None => detect_format(&sparse).ok_or_else(|| Error::MissingFile(sparse.join("cameras.bin")))?,
        };
        let model = parse_sparse_model(&sparse, format)?;
        let mut views = model
            .images
            .values()
            .map(|img| {
                Ok(ViewEntry {
                    name: img.name.clone(),
                    image_id: img.id,
                    camera: model.camera_for_image(img)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        views.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(Dataset {
            root: root.to_path_buf(),
            model,
            views,
        })
    }

    pub fn image_path(&self, view: &ViewEntry) -> PathBuf {
        self.root.join("images").join(&view.name)
    }

    /// Depth file matched by basename: `depth/<stem>.pfm` or `depth/<stem>.dpth`.
    pub fn depth_path(&self, view: &ViewEntry) -> Result<PathBuf> {
        let stem = Path::new(&view.name)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| view.name.clone());
        let dir = self.root.join("depth");
        for ext in ["pfm", "dpth"] {
            let p = dir.join(format!("{stem}.{ext}"));
            if p.is_file() {
                return Ok(p);
            }
        }
        Err(Error::MissingFile(dir.join(format!("{stem}.pfm"))))
    }

    fn load_color(&self, view: &ViewEntry, divisor: usize) -> Result<(CameraModel, ColorImage)> {
        let image = load_image(&self.image_path(view))?;
        if image.width != view.camera.width || image.height != view.camera.height {
            return Err(Error::DimensionMismatch(format!(
                "image {} is {}x{} but its camera is {}x{}",
                view.name, image.width, image.height, view.camera.width, view.camera.height
            )));
        }
        let image = image.downscale(divisor);
        let camera = view.camera.downscaled(divisor);
        Ok((camera, image))
    }

    pub fn load_test_view(&self, view: &ViewEntry, divisor: usize, extrapolated: bool) -> Result<TestView> {
        let (camera, image) = self.load_color(view, divisor)?;
        Ok(TestView {
            name: view.name.clone(),
            camera,
            image,
            extrapolated,
        })
    }

    pub fn load_train_view(&self, view: &ViewEntry, divisor: usize, invert_depth: bool) -> Result<TrainView> {
        let (camera, image) = self.load_color(view, divisor)?;
        let depth_path = self.depth_path(view)?;
        let mut prior = load_depth_map(&depth_path)?;
        if prior.width != view.camera.width || prior.height != view.camera.height {
            return Err(Error::DimensionMismatch(format!(
                "depth {} is {}x{} but image {} is {}x{}",
                depth_path.display(),
                prior.width,
                prior.height,
                view.name,
                view.camera.width,
                view.camera.height
            )));
        }
        if invert_depth {
            prior = prior.inverted();
        }
        let prior = prior.resized(camera.width, camera.height);
        let view = TrainView {
            name: view.name.clone(),
            camera,
            image,
            prior_depth: prior.values,
            valid_mask: prior.valid,
        };
        view.check()?;
        Ok(view)
    }

    pub fn split_indices(&self, opts: &IngestOptions) -> Result<SplitIndices> {
        uniform_split(self.views.len(), opts.n_train, opts.n_test)
    }

    /// Loads the uniform train/test split.
    pub fn load_split(&self, opts: &IngestOptions) -> Result<DatasetSplit> {
        if opts.resolution_divisor == 0 {
            return Err(Error::InvalidConfig("resolution_divisor must be ≥ 1".into()));
        }
        let idx = self.split_indices(opts)?;
        let train = idx
            .train
            .iter()
            .map(|&i| self.load_train_view(&self.views[i], opts.resolution_divisor, opts.invert_depth))
            .collect::<Result<Vec<_>>>()?;
        let test = idx
            .test
            .iter()
            .zip(&idx.extrapolated)
            .map(|(&i, &e)| self.load_test_view(&self.views[i], opts.resolution_divisor, e))
            .collect::<Result<Vec<_>>>()?;
        Ok(DatasetSplit { train, test })
    }
}

/// Loads a prior for callers that pair depth with images themselves.
pub fn load_prior(path: &Path, invert: bool) -> Result<DepthPrior> {
    let d = load_depth_map(path)?;
    Ok(if invert { d.inverted() } else { d })
}
