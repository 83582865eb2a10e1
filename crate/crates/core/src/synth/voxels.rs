//! Per-voxel observation sets extracted from rendered views.
//!
//! Geometry and poses are known exactly, so voxels are area-uniform samples
//! of the true surface rather than cells of a fused distance field.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::render::Frame;
use super::scene::Scene;
use crate::brdf::Rgb;
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Minimum `o·n` for an observation to be recorded.
pub const MIN_VIEW_COSINE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// LDR colour in `[0,1]`.
    pub color: Rgb,
    /// Unit vector from the voxel towards the camera.
    pub view_dir: Vec3,
    pub frame_id: u32,
    pub f_bar: Rgb,
    pub b_bar: Rgb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelSample {
    pub position: Vec3,
    pub normal: Vec3,
    pub observations: Vec<Observation>,
}

impl VoxelSample {
    /// Copy keeping only observations from frames `< views`; `None` if none remain.
    pub fn truncated(&self, views: usize) -> Option<VoxelSample> {
        let observations: Vec<_> =
            self.observations.iter().copied().filter(|o| (o.frame_id as usize) < views).collect();
        (!observations.is_empty()).then(|| VoxelSample { observations, ..self.clone() })
    }
}

/// True when the segment from `position` to `target` leaves the surface
/// without passing through the shape again.
pub fn unoccluded(scene: &Scene, position: Vec3, normal: Vec3, target: Vec3) -> bool {
    let start = position + normal * 1e-7;
    let to = target - start;
    let dist = to.norm();
    match scene.shape.intersect(start, to / dist, 1e-6) {
        Some(hit) => hit.t >= dist,
        None => true,
    }
}

/// Observations of a surface point in each frame.
pub fn observe(scene: &Scene, frames: &[Frame], position: Vec3, normal: Vec3) -> Vec<Observation> {
    let mut out = Vec::new();
    for (i, frame) in frames.iter().enumerate() {
        let cam = &frame.camera;
        let o = (cam.pose.position - position).normalized();
        if o.dot(normal) <= MIN_VIEW_COSINE {
            continue;
        }
        if !unoccluded(scene, position, normal, cam.pose.position) {
            continue;
        }
        let Some((u, v)) = cam.project(position) else { continue };
        if !cam.in_image(u, v) {
            continue;
        }
        out.push(Observation {
            color: frame.sample_ldr(u, v),
            view_dir: o,
            frame_id: i as u32,
            f_bar: frame.f_bar,
            b_bar: frame.b_bar,
        });
    }
    out
}

/// Sample `k` surface points and collect their observations. Points seen by
/// no frame are dropped.
pub fn extract_voxel_samples(scene: &Scene, frames: &[Frame], k: usize, seed: u64) -> Result<Vec<VoxelSample>> {
    if frames.is_empty() {
        return Err(Error::Empty("no frames to extract voxels from".into()));
    }
    if k == 0 {
        return Err(Error::Config("voxel count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = scene.shape.surface_sampler();
    let voxels: Vec<VoxelSample> = (0..k)
        .filter_map(|_| {
            let (position, normal) = sampler.sample(&mut rng);
            let observations = observe(scene, frames, position, normal);
            (!observations.is_empty()).then_some(VoxelSample { position, normal, observations })
        })
        .collect();
    if voxels.is_empty() {
        return Err(Error::DegenerateScene("no voxel is observed by any frame".into()));
    }
    Ok(voxels)
}
