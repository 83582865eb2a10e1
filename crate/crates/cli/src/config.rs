use std::path::Path;

use reflectance::eval::RenderRequest;
use reflectance::synth::DatasetConfig;
use reflectance::training::{LossConfig, TrainConfig};
use reflectance::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_VIEW_SWEEP: [usize; 7] = [1, 2, 5, 10, 20, 30, 40];
pub const DEFAULT_VOXEL_SWEEP: [usize; 5] = [1, 5, 20, 50, 354];
pub const DEFAULT_SCALE_RANGE: [f64; 2] = [0.5, 1.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub views: Vec<usize>,
    pub voxels: Vec<usize>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings { views: DEFAULT_VIEW_SWEEP.to_vec(), voxels: DEFAULT_VOXEL_SWEEP.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSettings {
    /// Illumination factor range for the perturbed validation split.
    pub scale_range: [f64; 2],
    /// E_c weight of the regularized arm.
    pub lambda: f64,
}

impl Default for AblationSettings {
    fn default() -> Self {
        AblationSettings { scale_range: DEFAULT_SCALE_RANGE, lambda: reflectance::training::DEFAULT_LAMBDA }
    }
}

/// Contents of the file passed with `--config`. Every section is optional;
/// command-line flags override it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub loss: Option<LossConfig>,
    pub render: RenderRequest,
    pub sweep: SweepSettings,
    pub ablation: AblationSettings,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }
}
