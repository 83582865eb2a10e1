use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    maxpool2x2, named, relu, relu_backward, scatter_backward, setmax, tanh, tanh_backward, Conv3x3, ImageShape, Linear,
    MaxPool, Module, Real, Tensor,
};

pub const CONV_CHANNELS: usize = 16;
pub const EMBED: usize = 64;
pub const HIDDEN: usize = 32;
pub const OUTPUTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HemiCnnConfig {
    /// Hemisphere image side length.
    pub resolution: usize,
    /// Images (voxels) per prediction.
    pub voxels: usize,
}

impl Default for HemiCnnConfig {
    fn default() -> Self {
        HemiCnnConfig { resolution: 8, voxels: 25 }
    }
}

impl HemiCnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 4 || self.resolution % 2 != 0 {
            return Err(Error::Config(format!("hemisphere resolution must be even and ≥ 4, got {}", self.resolution)));
        }
        if self.voxels == 0 {
            return Err(Error::Config("HemiCNN needs at least one voxel".into()));
        }
        Ok(())
    }

    pub fn flat_dim(&self) -> usize {
        (self.resolution / 2) * (self.resolution / 2) * CONV_CHANNELS
    }

    /// Exact parameter count from the layer sizes.
    pub fn param_count(&self) -> usize {
        let conv1 = 9 * 3 * CONV_CHANNELS + CONV_CHANNELS;
        let conv2 = 9 * CONV_CHANNELS * CONV_CHANNELS + CONV_CHANNELS;
        let fc1 = self.flat_dim() * EMBED + EMBED;
        let fc2 = EMBED * HIDDEN + HIDDEN;
        let out = HIDDEN * OUTPUTS + OUTPUTS;
        conv1 + conv2 + fc1 + fc2 + out
    }
}

/// Siamese convolutional branch per hemisphere image, element-wise max over
/// the set, then a small regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct HemiCnn<T> {
    pub config: HemiCnnConfig,
    pub conv1: Conv3x3<T>,
    pub conv2: Conv3x3<T>,
    pub fc1: Linear<T>,
    pub fc2: Linear<T>,
    pub out: Linear<T>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct HemiCache<T> {
    groups: Vec<usize>,
    x: Vec<T>,
    a1: Vec<T>,
    h1: Vec<T>,
    a2: Vec<T>,
    pool: MaxPool<T>,
    arg: Vec<usize>,
    merged: Vec<T>,
    hidden: Vec<T>,
}

impl<T: Real> HemiCnn<T> {
    pub fn new<R: Rng>(config: HemiCnnConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        Ok(HemiCnn {
            config,
            conv1: Conv3x3::new(3, CONV_CHANNELS, rng),
            conv2: Conv3x3::new(CONV_CHANNELS, CONV_CHANNELS, rng),
            fc1: Linear::new(config.flat_dim(), EMBED, rng),
            fc2: Linear::new(EMBED, HIDDEN, rng),
            out: Linear::new(HIDDEN, OUTPUTS, rng),
        })
    }

    fn image_shape(&self, images: &[T], groups: &[usize]) -> Result<ImageShape> {
        let r = self.config.resolution;
        let batch: usize = groups.iter().sum();
        if groups.is_empty() || groups.contains(&0) {
            return Err(Error::Empty("every prediction needs at least one hemisphere image".into()));
        }
        if images.len() != batch * r * r * 3 {
            return Err(Error::ShapeMismatch(format!(
                "expected {batch} images of {r}×{r}×3 ({} values), got {}",
                batch * r * r * 3,
                images.len()
            )));
        }
        Ok(ImageShape { batch, height: r, width: r, channels: 3 })
    }

    /// Predictions for consecutive groups of images, one 5-vector per group.
    pub fn forward(&self, images: &[T], groups: &[usize]) -> Result<(Vec<T>, HemiCache<T>)> {
        let s = self.image_shape(images, groups)?;
        let a1 = self.conv1.forward(images, s)?;
        let h1 = relu(&a1);
        let s16 = s.with_channels(CONV_CHANNELS);
        let a2 = self.conv2.forward(&h1, s16)?;
        let h2 = relu(&a2);
        let pool = maxpool2x2(&h2, s16)?;
        let emb = self.fc1.forward(&pool.y)?;
        let (merged, arg) = setmax(&emb, EMBED, groups)?;
        let hidden = tanh(&self.fc2.forward(&merged)?);
        let y = self.out.forward(&hidden)?;
        let cache = HemiCache { groups: groups.to_vec(), x: images.to_vec(), a1, h1, a2, pool, arg, merged, hidden };
        Ok((y, cache))
    }

    pub fn predict(&self, images: &[T], groups: &[usize]) -> Result<Vec<T>> {
        Ok(self.forward(images, groups)?.0)
    }

    /// Accumulates parameter gradients for upstream gradient `dy` into `grad`.
    pub fn backward(&self, cache: &HemiCache<T>, dy: &[T], grad: &mut HemiCnn<T>) -> Result<()> {
        let s = self.image_shape(&cache.x, &cache.groups)?;
        let s16 = s.with_channels(CONV_CHANNELS);
        let dh = self.out.backward(&cache.hidden, dy, &mut grad.out, true)?.unwrap();
        let dpre = tanh_backward(&cache.hidden, &dh);
        let dmerged = self.fc2.backward(&cache.merged, &dpre, &mut grad.fc2, true)?.unwrap();
        let demb = scatter_backward(&cache.arg, &dmerged, s.batch * EMBED);
        let dpool = self.fc1.backward(&cache.pool.y, &demb, &mut grad.fc1, true)?.unwrap();
        let dh2 = scatter_backward(&cache.pool.argmax, &dpool, s16.len());
        let da2 = relu_backward(&cache.a2, &dh2);
        let dh1 = self.conv2.backward(&cache.h1, s16, &da2, &mut grad.conv2, true)?.unwrap();
        let da1 = relu_backward(&cache.a1, &dh1);
        self.conv1.backward(&cache.x, s, &da1, &mut grad.conv1, false)?;
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> HemiCnn<U> {
        let c = |t: &Tensor<T>| t.cast::<U>();
        HemiCnn {
            config: self.config,
            conv1: Conv3x3 { w: c(&self.conv1.w), b: c(&self.conv1.b) },
            conv2: Conv3x3 { w: c(&self.conv2.w), b: c(&self.conv2.b) },
            fc1: Linear { w: c(&self.fc1.w), b: c(&self.fc1.b) },
            fc2: Linear { w: c(&self.fc2.w), b: c(&self.fc2.b) },
            out: Linear { w: c(&self.out.w), b: c(&self.out.b) },
        }
    }
}

impl<T: Real> Module<T> for HemiCnn<T> {
    fn tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = named("conv1", &self.conv1);
        v.extend(named("conv2", &self.conv2));
        v.extend(named("fc1", &self.fc1));
        v.extend(named("fc2", &self.fc2));
        v.extend(named("out", &self.out));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = self.conv1.tensors_mut();
        v.extend(self.conv2.tensors_mut());
        v.extend(self.fc1.tensors_mut());
        v.extend(self.fc2.tensors_mut());
        v.extend(self.out.tensors_mut());
        v
    }
}
