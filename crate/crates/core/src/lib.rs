//! Homogeneous Ward BRDF estimation from unstructured multi-view RGBD
//! observations.
//!
//! The crate bundles a synthetic data generator (direct-illumination
//! renderer plus per-voxel observation extraction), a small reverse-mode
//! network toolkit, the two set-based regressors (`hemicnn`, `grouplet`),
//! their training losses and an evaluation harness.

pub mod brdf;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod grouplet;
pub mod hemicnn;
pub mod math;
pub mod nn;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
