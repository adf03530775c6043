//! COLMAP ingestion, depth priors, the few-shot split and cloud initialization.

pub mod dataset;
pub mod depth;
pub mod init;
pub mod model;
pub mod split;

pub use dataset::{Dataset, DatasetSplit, IngestOptions, TestView, TrainView, ViewEntry};
pub use depth::{load_depth_map, DepthPrior};
pub use init::{camera_extent, init_cloud, init_cloud_from_points};
pub use model::{
    detect_format, parse_sparse_model, write_sparse_model, CameraKind, ColmapCamera, ColmapImage, ModelFormat,
    Point2D, Point3D, SparseModel,
};
pub use split::{uniform_split, SplitIndices};
