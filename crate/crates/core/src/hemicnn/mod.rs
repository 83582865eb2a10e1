//! Hemisphere images and the siamese convolutional regressor.

pub mod image;
pub mod net;
pub mod select;

pub use image::{alignment, build_hemisphere_image, pixel_center, project_observations, HemisphereImage};
pub use net::{HemiCache, HemiCnn, HemiCnnConfig};
pub use select::select_voxels;

use crate::nn::Real;

/// Flattens images into the network's input layout.
pub fn stack_images<T: Real>(images: &[&HemisphereImage]) -> Vec<T> {
    images.iter().flat_map(|im| im.data.iter().map(|&v| T::of(v))).collect()
}

#[cfg(test)]
mod tests;
