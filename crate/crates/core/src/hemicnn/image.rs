use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};
use crate::synth::render::write_ppm;
use crate::synth::VoxelSample;

/// Dense `R×R×3` raster of a voxel's observations seen from above its
/// tangent plane. Row `j`, column `i` sits at `(x, y) = (c(i), c(j))` with
/// `c(k) = −1 + (k + ½)·2/R`.
#[derive(Debug, Clone, PartialEq)]
pub struct HemisphereImage {
    pub resolution: usize,
    pub data: Vec<f64>,
    pub mask: Vec<bool>,
}

pub fn pixel_center(resolution: usize, k: usize) -> f64 {
    -1.0 + (k as f64 + 0.5) * 2.0 / resolution as f64
}

impl HemisphereImage {
    pub fn pixel(&self, i: usize, j: usize) -> [f64; 3] {
        let at = (j * self.resolution + i) * 3;
        [self.data[at], self.data[at + 1], self.data[at + 2]]
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        write_ppm(path, self.resolution, self.resolution, &bytes)
    }
}

/// Rotation taking `normal` to +z about the axis `normal × z`.
pub fn alignment(normal: Vec3) -> Mat3 {
    Mat3::rotation_between(normal.normalized(), Vec3::Z)
}

/// Projected `(x, y)` sites and colours of the front-facing observations.
pub fn project_observations(voxel: &VoxelSample) -> Vec<([f64; 2], [f64; 3])> {
    let rot = alignment(voxel.normal);
    voxel
        .observations
        .iter()
        .filter_map(|o| {
            let d = rot.mul_vec(o.view_dir);
            (d.z > 0.0).then_some(([d.x, d.y], o.color))
        })
        .collect()
}

/// Nearest-neighbour fill of the unit disk from the projected observations;
/// ties go to the earliest observation.
pub fn build_hemisphere_image(voxel: &VoxelSample, resolution: usize) -> Result<HemisphereImage> {
    if resolution == 0 {
        return Err(Error::Config("hemisphere resolution must be positive".into()));
    }
    if voxel.observations.is_empty() {
        return Err(Error::Empty("voxel has no observations".into()));
    }
    let sites = project_observations(voxel);
    if sites.is_empty() {
        return Err(Error::EmptyHemisphere("every observation faces away from the normal".into()));
    }
    let r = resolution;
    let mut data = vec![0.0; r * r * 3];
    let mut mask = vec![false; r * r];
    for j in 0..r {
        let y = pixel_center(r, j);
        for i in 0..r {
            let x = pixel_center(r, i);
            if x * x + y * y > 1.0 {
                continue;
            }
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, (s, _)) in sites.iter().enumerate() {
                let d = (s[0] - x).powi(2) + (s[1] - y).powi(2);
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            mask[j * r + i] = true;
            data[(j * r + i) * 3..(j * r + i) * 3 + 3].copy_from_slice(&sites[best].1);
        }
    }
    Ok(HemisphereImage { resolution: r, data, mask })
}
