use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::LossConfig;
use super::norm::NormStats;
use crate::brdf::{ParamVec, Rgb};
use crate::error::{Error, Result};
use crate::grouplet::{sample_node_inputs, Grouplet, GroupletCache, GroupletConfig, GroupletPreset, NodeBatch};
use crate::hemicnn::{build_hemisphere_image, select_voxels, HemiCache, HemiCnn, HemiCnnConfig, HemisphereImage};
use crate::nn::{encode_checkpoint, read_checkpoint, Module, Real, Tensor};
use crate::synth::dataset::derive_seed;
use crate::synth::{SceneRecord, VoxelSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "hemicnn")]
    HemiCnn,
    #[serde(rename = "grouplet-fast")]
    GroupletFast,
    #[serde(rename = "grouplet-slow")]
    GroupletSlow,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::HemiCnn => "hemicnn",
            ModelKind::GroupletFast => "grouplet-fast",
            ModelKind::GroupletSlow => "grouplet-slow",
        }
    }

    pub fn is_grouplet(self) -> bool {
        self != ModelKind::HemiCnn
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hemicnn" => Ok(ModelKind::HemiCnn),
            "grouplet-fast" | "grouplet" => Ok(ModelKind::GroupletFast),
            "grouplet-slow" => Ok(ModelKind::GroupletSlow),
            other => Err(Error::Config(format!("unknown model '{other}' (hemicnn, grouplet-fast, grouplet-slow)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" | "32" => Ok(Precision::F32),
            "f64" | "64" => Ok(Precision::F64),
            other => Err(Error::Config(format!("unknown precision '{other}' (f32, f64)"))),
        }
    }
}

/// Architecture settings for either network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    HemiCnn(HemiCnnConfig),
    Grouplet(GroupletConfig),
}

impl Architecture {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::HemiCnn => Architecture::HemiCnn(HemiCnnConfig::default()),
            ModelKind::GroupletFast => Architecture::Grouplet(GroupletConfig::preset(GroupletPreset::Fast)),
            ModelKind::GroupletSlow => Architecture::Grouplet(GroupletConfig::preset(GroupletPreset::Slow)),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Architecture::HemiCnn(c) => c.param_count(),
            Architecture::Grouplet(c) => c.param_count(),
        }
    }

    /// Inputs per prediction at inference (images or nodes).
    pub fn inference_size(&self) -> usize {
        match self {
            Architecture::HemiCnn(c) => c.voxels,
            Architecture::Grouplet(c) => c.nodes,
        }
    }

    pub fn with_inference_size(self, n: usize) -> Self {
        match self {
            Architecture::HemiCnn(c) => Architecture::HemiCnn(HemiCnnConfig { voxels: n, ..c }),
            Architecture::Grouplet(c) => Architecture::Grouplet(GroupletConfig { nodes: n, ..c }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network<T> {
    HemiCnn(HemiCnn<T>),
    Grouplet(Grouplet<T>),
}

pub enum Cache<T> {
    HemiCnn(HemiCache<T>),
    Grouplet(GroupletCache<T>),
}

/// Network input for a batch of predictions.
#[derive(Debug, Clone, PartialEq)]
pub enum BatchInput<T> {
    Images { data: Vec<T>, groups: Vec<usize> },
    Nodes(NodeBatch<T>),
}

impl<T: Real> Network<T> {
    pub fn new<R: Rng>(arch: &Architecture, rng: &mut R) -> Result<Self> {
        Ok(match arch {
            Architecture::HemiCnn(c) => Network::HemiCnn(HemiCnn::new(*c, rng)?),
            Architecture::Grouplet(c) => Network::Grouplet(Grouplet::new(*c, rng)?),
        })
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            Network::HemiCnn(n) => Architecture::HemiCnn(n.config),
            Network::Grouplet(n) => Architecture::Grouplet(n.config),
        }
    }

    pub fn set_inference_size(&mut self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Config("inference size must be positive".into()));
        }
        match self {
            Network::HemiCnn(h) => h.config.voxels = n,
            Network::Grouplet(g) => g.config.nodes = n,
        }
        Ok(())
    }

    pub fn forward(&self, input: &BatchInput<T>) -> Result<(Vec<T>, Cache<T>)> {
        match (self, input) {
            (Network::HemiCnn(n), BatchInput::Images { data, groups }) => {
                let (y, c) = n.forward(data, groups)?;
                Ok((y, Cache::HemiCnn(c)))
            }
            (Network::Grouplet(n), BatchInput::Nodes(b)) => {
                let (y, c) = n.forward(b)?;
                Ok((y, Cache::Grouplet(c)))
            }
            _ => Err(Error::ShapeMismatch("input kind does not match the network".into())),
        }
    }

    pub fn backward(&self, cache: &Cache<T>, dy: &[T], grad: &mut Network<T>) -> Result<()> {
        match (self, cache, grad) {
            (Network::HemiCnn(n), Cache::HemiCnn(c), Network::HemiCnn(g)) => n.backward(c, dy, g),
            (Network::Grouplet(n), Cache::Grouplet(c), Network::Grouplet(g)) => n.backward(c, dy, g),
            _ => Err(Error::ShapeMismatch("cache kind does not match the network".into())),
        }
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        match self {
            Network::HemiCnn(n) => Network::HemiCnn(n.cast()),
            Network::Grouplet(n) => Network::Grouplet(n.cast()),
        }
    }
}

impl<T: Real> Module<T> for Network<T> {
    fn tensors(&self) -> Vec<(String, &Tensor<T>)> {
        match self {
            Network::HemiCnn(n) => n.tensors(),
            Network::Grouplet(n) => n.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Network::HemiCnn(n) => n.tensors_mut(),
            Network::Grouplet(n) => n.tensors_mut(),
        }
    }
}

/// Per-scene data that does not change between minibatches.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    pub id: String,
    pub index: usize,
    pub record: SceneRecord,
    /// Voxels usable by HemiCNN and their hemisphere images.
    pub hemi: Option<(Vec<VoxelSample>, Vec<HemisphereImage>)>,
}

impl PreparedScene {
    pub fn new(id: &str, index: usize, record: SceneRecord, arch: &Architecture) -> Result<Self> {
        let hemi = match arch {
            Architecture::HemiCnn(c) => {
                let mut voxels = Vec::new();
                let mut images = Vec::new();
                for v in &record.voxels {
                    match build_hemisphere_image(v, c.resolution) {
                        Ok(im) => {
                            voxels.push(v.clone());
                            images.push(im);
                        }
                        Err(Error::EmptyHemisphere(_)) => {}
                        Err(e) => return Err(e),
                    }
                }
                if voxels.is_empty() {
                    return Err(Error::DegenerateScene(format!("scene {id} has no usable hemisphere images")));
                }
                Some((voxels, images))
            }
            Architecture::Grouplet(_) => None,
        };
        if record.voxels.is_empty() {
            return Err(Error::DegenerateScene(format!("scene {id} has no voxels")));
        }
        Ok(PreparedScene { id: id.to_string(), index, record, hemi })
    }

    pub fn target(&self) -> &crate::brdf::WardBrdf {
        self.record.material()
    }
}

/// Distinct frames among `observations`, as `(F̄, B̄)` pairs in frame order.
fn frame_stats<'a>(observations: impl Iterator<Item = &'a crate::synth::Observation>) -> Vec<(Rgb, Rgb)> {
    let mut seen = std::collections::BTreeMap::new();
    for o in observations {
        seen.entry(o.frame_id).or_insert((o.f_bar, o.b_bar));
    }
    seen.into_values().collect()
}

/// How node inputs are drawn for a Grouplet scene.
#[derive(Debug, Clone, Copy)]
pub enum Sampling<'a> {
    /// Training: one stream for all draws.
    Stream(&'a std::cell::RefCell<ChaCha8Rng>),
    /// Evaluation: voxel choice from `(seed, scene)`, node inputs from
    /// `(seed, scene, voxel)`.
    Seeded(u64),
}

/// Builds the network input for `scenes` with `size` images or nodes each,
/// returning it with the frames each prediction used.
pub fn build_batch<T: Real>(
    arch: &Architecture,
    scenes: &[&PreparedScene],
    size: usize,
    sampling: Sampling<'_>,
) -> Result<(BatchInput<T>, Vec<Vec<(Rgb, Rgb)>>)> {
    let mut views = Vec::with_capacity(scenes.len());
    match arch {
        Architecture::HemiCnn(c) => {
            let mut data = Vec::with_capacity(scenes.len() * size * c.resolution * c.resolution * 3);
            let mut groups = Vec::with_capacity(scenes.len());
            for s in scenes {
                let (voxels, images) = s.hemi.as_ref().ok_or_else(|| Error::Config("scene prepared for another model".into()))?;
                let idx = match sampling {
                    Sampling::Stream(rng) => select_voxels(voxels, size, &mut *rng.borrow_mut())?,
                    Sampling::Seeded(seed) => {
                        select_voxels(voxels, size, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, s.index as u64)))?
                    }
                };
                for &i in &idx {
                    data.extend(images[i].data.iter().map(|&v| T::of(v)));
                }
                groups.push(idx.len());
                views.push(frame_stats(idx.iter().flat_map(|&i| voxels[i].observations.iter())));
            }
            Ok((BatchInput::Images { data, groups }, views))
        }
        Architecture::Grouplet(c) => {
            let mut batch = NodeBatch::new(c.observations);
            for s in scenes {
                let voxels = &s.record.voxels;
                let nodes = match sampling {
                    Sampling::Stream(rng) => {
                        let mut rng = rng.borrow_mut();
                        let chosen = choose_voxels(voxels.len(), size, &mut *rng);
                        chosen
                            .iter()
                            .map(|&i| Ok((voxels[i].normal, sample_node_inputs(&voxels[i], c.observations, &mut *rng)?)))
                            .collect::<Result<Vec<_>>>()?
                    }
                    Sampling::Seeded(seed) => {
                        let scene_seed = derive_seed(seed, s.index as u64);
                        let chosen = choose_voxels(voxels.len(), size, &mut ChaCha8Rng::seed_from_u64(scene_seed));
                        chosen
                            .iter()
                            .map(|&i| {
                                let mut r = ChaCha8Rng::seed_from_u64(derive_seed(scene_seed, i as u64));
                                Ok((voxels[i].normal, sample_node_inputs(&voxels[i], c.observations, &mut r)?))
                            })
                            .collect::<Result<Vec<_>>>()?
                    }
                };
                views.push(frame_stats(nodes.iter().flat_map(|(_, o)| o.iter())));
                batch.push_group(&nodes)?;
            }
            Ok((BatchInput::Nodes(batch), views))
        }
    }
}

/// `n` voxel indices out of `available`: a random subset when enough exist,
/// otherwise all of them plus draws with replacement.
pub fn choose_voxels<R: Rng>(available: usize, n: usize, rng: &mut R) -> Vec<usize> {
    if available >= n {
        rand::seq::index::sample(rng, available, n).into_vec()
    } else {
        let mut v: Vec<usize> = (0..available).collect();
        v.extend((available..n).map(|_| rng.gen_range(0..available)));
        v
    }
}

/// Everything stored alongside the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub format: String,
    pub model: ModelKind,
    pub architecture: Architecture,
    pub loss: LossConfig,
    pub norm: NormStats,
    pub precision: Precision,
    pub step: usize,
    pub param_count: usize,
    #[serde(default)]
    pub train: Option<serde_json::Value>,
}

pub const CHECKPOINT_FORMAT: &str = "reflectance-checkpoint-v1";

/// A network with its normalization statistics and loss settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<T> {
    pub meta: ModelMeta,
    pub network: Network<T>,
}

impl<T: Real> TrainedModel<T> {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_value(&self.meta)?;
        encode_checkpoint(&meta, &self.network.tensors())
    }

    pub fn save(&self, path: &Path) -> Result<usize> {
        let bytes = self.to_bytes()?;
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, &bytes)?;
        Ok(bytes.len())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = read_checkpoint(path)?;
        let meta: ModelMeta =
            serde_json::from_value(raw.meta).map_err(|e| Error::Checkpoint(format!("checkpoint metadata: {e}")))?;
        if meta.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown checkpoint format '{}'", meta.format)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut network = Network::<T>::new(&meta.architecture, &mut rng)?;
        let names: Vec<(String, Vec<usize>)> =
            network.tensors().iter().map(|(n, t)| (n.clone(), t.shape().to_vec())).collect();
        if names.len() != raw.tensors.len() {
            return Err(Error::Checkpoint("tensor count does not match the architecture".into()));
        }
        for ((name, shape), (info, _)) in names.iter().zip(&raw.tensors) {
            if *name != info.name || *shape != info.shape {
                return Err(Error::Checkpoint(format!("tensor {} {:?} does not match {} {:?}", info.name, info.shape, name, shape)));
            }
        }
        let values: Vec<T> = raw.tensors.iter().flat_map(|(_, v)| v.iter().map(|&x| T::of(x as f64))).collect();
        network.load_flat(&values)?;
        Ok(TrainedModel { meta, network })
    }

    /// Denormalised prediction vectors for a batch.
    pub fn predict(&self, input: &BatchInput<T>) -> Result<Vec<ParamVec>> {
        let (y, _) = self.network.forward(input)?;
        Ok(y.chunks_exact(5).map(|z| self.meta.norm.denormalize(&std::array::from_fn(|k| z[k].f64()))).collect())
    }
}
