use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brdf::{ParamVec, WardBrdf};
use crate::error::{Error, Result};
use crate::synth::{Dataset, SceneRecord, Split};
use crate::training::model::{build_batch, Architecture, PreparedScene, Sampling, TrainedModel};
use crate::training::{NormStats, Parameterization};

/// What produces a prediction for a scene.
#[derive(Debug, Clone, Copy)]
pub enum Predictor<'a> {
    Model(&'a TrainedModel<f64>),
    /// Always the training mean.
    Mean(&'a NormStats),
    /// Returns the ground truth.
    Oracle(&'a NormStats),
}

impl Predictor<'_> {
    pub fn norm(&self) -> &NormStats {
        match self {
            Predictor::Model(m) => &m.meta.norm,
            Predictor::Mean(n) | Predictor::Oracle(n) => n,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Predictor::Model(m) => m.meta.model.to_string(),
            Predictor::Mean(_) => "mean-predictor".into(),
            Predictor::Oracle(_) => "oracle".into(),
        }
    }

    fn architecture(&self) -> Option<Architecture> {
        match self {
            Predictor::Model(m) => Some(m.network.architecture()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneResult {
    pub id: String,
    pub target: ParamVec,
    pub prediction: ParamVec,
    /// Normalised error per dimension.
    pub error: ParamVec,
    pub rmse: f64,
    /// `|(ρ̂_d + ρ̂_s) − (ρ_d + ρ_s)|` averaged over channels.
    pub scale_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub predictor: String,
    pub parameterization: Parameterization,
    pub dims: Vec<String>,
    pub scenes: usize,
    /// Root mean square of the normalised error over all scenes and dimensions.
    pub rmse: f64,
    pub rmse_per_dim: ParamVec,
    pub mean_scene_rmse: f64,
    pub mean_scale_error: f64,
    pub inference_size: Option<usize>,
    pub seed: u64,
    pub per_scene: Vec<SceneResult>,
}

/// Scale error of a clamped physical prediction.
pub fn scale_error(pred: &WardBrdf, target: &WardBrdf) -> f64 {
    let (p, t) = (pred.albedo_sum(), target.albedo_sum());
    (0..3).map(|c| (p[c] - t[c]).abs()).sum::<f64>() / 3.0
}

/// Loads a split and builds per-scene inputs for `arch` (none needed for the
/// baseline predictors).
pub fn prepare_scenes(dataset: &Dataset, split: Split, arch: Option<&Architecture>) -> Result<Vec<PreparedScene>> {
    let entries: Vec<_> = dataset.entries(split).cloned().collect();
    let records = dataset.load_split(split)?;
    prepare_records(entries.iter().map(|e| (e.id.clone(), e.index)).zip(records).collect(), arch)
}

pub(crate) fn prepare_records(
    items: Vec<((String, usize), SceneRecord)>,
    arch: Option<&Architecture>,
) -> Result<Vec<PreparedScene>> {
    let arch = arch.copied().unwrap_or(Architecture::Grouplet(Default::default()));
    items.into_par_iter().map(|((id, index), rec)| PreparedScene::new(&id, index, rec, &arch)).collect()
}

fn score(norm: &NormStats, id: &str, target: &WardBrdf, raw: &ParamVec) -> SceneResult {
    let param = norm.parameterization;
    let prediction = param.clamp_prediction(raw);
    let t = param.encode(target);
    let error: ParamVec = std::array::from_fn(|k| (prediction[k] - t[k]) / norm.std[k]);
    let rmse = (error.iter().map(|e| e * e).sum::<f64>() / 5.0).sqrt();
    let phys = param.decode(&prediction).0;
    SceneResult { id: id.to_string(), target: t, prediction, error, rmse, scale_error: scale_error(&phys, target) }
}

/// Normalised RMSE of `predictor` over `scenes`. Node and voxel sampling is
/// derived from `(seed, scene)`, so the result is reproducible.
pub fn evaluate(predictor: Predictor<'_>, scenes: &[PreparedScene], seed: u64) -> Result<EvalReport> {
    if scenes.is_empty() {
        return Err(Error::Empty("no scenes to evaluate".into()));
    }
    let norm = *predictor.norm();
    let per_scene: Vec<SceneResult> = scenes
        .par_iter()
        .map(|s| {
            let target = s.target();
            let raw = match predictor {
                Predictor::Mean(n) => n.mean,
                Predictor::Oracle(n) => n.parameterization.encode(target),
                Predictor::Model(m) => {
                    let arch = m.network.architecture();
                    let (input, _) = build_batch::<f64>(&arch, &[s], arch.inference_size(), Sampling::Seeded(seed))?;
                    m.predict(&input)?[0]
                }
            };
            Ok(score(&norm, &s.id, target, &raw))
        })
        .collect::<Result<_>>()?;
    let n = per_scene.len() as f64;
    let rmse_per_dim: ParamVec =
        std::array::from_fn(|k| (per_scene.iter().map(|r| r.error[k] * r.error[k]).sum::<f64>() / n).sqrt());
    let rmse = (rmse_per_dim.iter().map(|r| r * r).sum::<f64>() / 5.0).sqrt();
    Ok(EvalReport {
        predictor: predictor.label(),
        parameterization: norm.parameterization,
        dims: norm.parameterization.dim_names().iter().map(|s| s.to_string()).collect(),
        scenes: per_scene.len(),
        rmse,
        rmse_per_dim,
        mean_scene_rmse: per_scene.iter().map(|r| r.rmse).sum::<f64>() / n,
        mean_scale_error: per_scene.iter().map(|r| r.scale_error).sum::<f64>() / n,
        inference_size: predictor.architecture().map(|a| a.inference_size()),
        seed,
        per_scene,
    })
}
