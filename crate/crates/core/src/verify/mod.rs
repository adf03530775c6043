//! Independent oracles: finite-difference gradient checks, synthetic scenes
//! with exact depth, and the depth-loss A/B harness.

pub mod ab;
pub mod fd;
pub mod synthetic;

pub use ab::{ab_experiment, run_arm, sparse_init, sparse_points, AbConfig, AbResult, ArmResult, InitConfig};
pub use fd::{
    central_difference, fd_gradient_check, random_gradcheck_scene, relative_error, GradCheckReport, GradCheckScene,
    GradProblem, LossSelector, ParamCheck,
};
pub use synthetic::{arc_cameras, make_synthetic, write_dataset, DatasetWriteOptions, SynthConfig, SyntheticScene};
