use serde::{Deserialize, Serialize};

use super::rmse::{evaluate, prepare_records, Predictor};
use crate::error::{Error, Result};
use crate::synth::SceneRecord;
use crate::training::model::TrainedModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub count: usize,
    pub rmse: f64,
    pub mean_scene_rmse: f64,
    /// Scenes that still had an observed voxel.
    pub scenes: usize,
    pub mean_observations_per_voxel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub model: String,
    /// RMSE with each voxel restricted to observations from the first `count` views.
    pub views: Vec<CoveragePoint>,
    /// RMSE with `count` voxels (nodes or images) per prediction, all views.
    pub voxels: Vec<CoveragePoint>,
}

impl CoverageReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sweep,count,rmse,mean_scene_rmse,scenes,mean_observations_per_voxel\n");
        for (name, pts) in [("views", &self.views), ("voxels", &self.voxels)] {
            for p in pts {
                s.push_str(&format!(
                    "{name},{},{:.6},{:.6},{},{:.3}\n",
                    p.count, p.rmse, p.mean_scene_rmse, p.scenes, p.mean_observations_per_voxel
                ));
            }
        }
        s
    }
}

fn strictly_increasing(v: &[usize], what: &str) -> Result<()> {
    if v.windows(2).any(|w| w[0] >= w[1]) || v.first() == Some(&0) {
        return Err(Error::Config(format!("{what} counts must be positive and strictly increasing")));
    }
    Ok(())
}

fn mean_observations(records: &[SceneRecord]) -> f64 {
    let (obs, vox) = records.iter().flat_map(|r| &r.voxels).fold((0usize, 0usize), |(o, v), x| (o + x.observations.len(), v + 1));
    if vox == 0 {
        0.0
    } else {
        obs as f64 / vox as f64
    }
}

/// Evaluates `model` with truncated view prefixes and with varying voxel
/// counts. `scenes` holds `(id, index, record)` rendered with at least
/// `max(view_counts)` views.
pub fn coverage_sweep(
    model: &TrainedModel<f64>,
    scenes: &[(String, usize, SceneRecord)],
    view_counts: &[usize],
    voxel_counts: &[usize],
    seed: u64,
) -> Result<CoverageReport> {
    strictly_increasing(view_counts, "view")?;
    strictly_increasing(voxel_counts, "voxel")?;
    let rendered = scenes.iter().map(|s| s.2.frames.len()).min().unwrap_or(0);
    if let Some(&k) = view_counts.iter().find(|&&k| k > rendered) {
        return Err(Error::Config(format!("view count {k} exceeds the {rendered} rendered views")));
    }
    let arch = model.network.architecture();
    let mut views = Vec::new();
    for &k in view_counts {
        let truncated: Vec<_> = scenes
            .iter()
            .map(|(id, idx, r)| ((id.clone(), *idx), r.truncated(k)))
            .filter(|(_, r)| !r.voxels.is_empty())
            .collect();
        let obs = mean_observations(&truncated.iter().map(|(_, r)| r.clone()).collect::<Vec<_>>());
        let prepared = prepare_records(truncated, Some(&arch))?;
        let rep = evaluate(Predictor::Model(model), &prepared, seed)?;
        views.push(CoveragePoint {
            count: k,
            rmse: rep.rmse,
            mean_scene_rmse: rep.mean_scene_rmse,
            scenes: rep.scenes,
            mean_observations_per_voxel: obs,
        });
    }
    let all: Vec<_> = scenes.iter().map(|(id, idx, r)| ((id.clone(), *idx), r.clone())).collect();
    let obs = mean_observations(&scenes.iter().map(|s| s.2.clone()).collect::<Vec<_>>());
    let prepared = prepare_records(all, Some(&arch))?;
    let mut voxels = Vec::new();
    for &n in voxel_counts {
        let mut m = model.clone();
        m.network.set_inference_size(n)?;
        let rep = evaluate(Predictor::Model(&m), &prepared, seed)?;
        voxels.push(CoveragePoint {
            count: n,
            rmse: rep.rmse,
            mean_scene_rmse: rep.mean_scene_rmse,
            scenes: rep.scenes,
            mean_observations_per_voxel: obs,
        });
    }
    Ok(CoverageReport { model: model.meta.model.to_string(), views, voxels })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationArm {
    pub lambda: f64,
    pub mean_scale_error: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub with_ec: AblationArm,
    pub without_ec: AblationArm,
    pub scenes: usize,
    /// Scale error is strictly lower with the image-statistics term.
    pub ec_helps: bool,
}

/// Compares two models trained with and without the image-statistics term
/// on the same (typically illumination-perturbed) scenes.
pub fn ablate_ec(
    with_ec: &TrainedModel<f64>,
    without_ec: &TrainedModel<f64>,
    scenes: &[(String, usize, SceneRecord)],
    seed: u64,
) -> Result<AblationReport> {
    let items = || scenes.iter().map(|(id, idx, r)| ((id.clone(), *idx), r.clone())).collect::<Vec<_>>();
    let arm = |m: &TrainedModel<f64>| -> Result<AblationArm> {
        let prepared = prepare_records(items(), Some(&m.network.architecture()))?;
        let rep = evaluate(Predictor::Model(m), &prepared, seed)?;
        Ok(AblationArm { lambda: m.meta.loss.lambda, mean_scale_error: rep.mean_scale_error, rmse: rep.rmse })
    };
    let a = arm(with_ec)?;
    let b = arm(without_ec)?;
    Ok(AblationReport { ec_helps: a.mean_scale_error < b.mean_scale_error, with_ec: a, without_ec: b, scenes: scenes.len() })
}
