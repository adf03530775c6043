//! Differentiable 3D Gaussian splatting for few-view scene reconstruction,
//! supervised by photometric loss plus a scale-invariant log-depth loss
//! against monocular depth priors.

pub mod colmap;
pub mod density;
pub mod error;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod real;
pub mod render;
pub mod scene;
pub mod ssim;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use real::{Precision, Real};
