//! Optimizable Gaussian scene representation.

pub mod camera;
pub mod cloud;
pub mod gaussian;
pub mod ply;
pub mod sh;

pub use camera::CameraModel;
pub use cloud::{
    ActivatedGaussian, CloudGrads, DensifyStats, Gaussian3D, GaussianCloud, ParamKind, PARAMS_PER_GAUSSIAN,
};
pub use gaussian::{covariance_from_params, logit, sigmoid};
pub use sh::{sh_backward, sh_to_color, sh_to_display_color, ShGrad, SH_C0, SH_C1, SH_COEFFS};
