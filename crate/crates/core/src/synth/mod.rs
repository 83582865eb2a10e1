//! Synthetic scenes: shapes, illumination, direct-lighting renderer, voxel
//! observation extraction and the on-disk dataset.

pub mod camera;
pub mod dataset;
pub mod geometry;
pub mod render;
pub mod scene;
pub mod srgb;
pub mod voxels;

pub use camera::{Camera, Intrinsics, Pose};
pub use dataset::{
    generate_dataset, generate_perturbed_split, Dataset, DatasetConfig, FrameStats, Manifest, SamplingRanges,
    SceneEntry, SceneMeta, SceneRecord, SceneSpec, Split,
};
pub use geometry::Shape;
pub use render::{render_view, Frame};
pub use scene::{DirectionalLight, Environment, Scene};
pub use srgb::{srgb_decode, srgb_encode, GAMMA};
pub use voxels::{extract_voxel_samples, Observation, VoxelSample};
