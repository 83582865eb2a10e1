use serde::{Deserialize, Serialize};

use super::loss::Parameterization;
use crate::brdf::{ParamVec, WardBrdf};
use crate::error::{Error, Result};

/// Per-dimension mean and population standard deviation of the training
/// targets in one parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub parameterization: Parameterization,
    pub mean: ParamVec,
    pub std: ParamVec,
}

pub fn compute_norm_stats<'a, I>(targets: I, parameterization: Parameterization) -> Result<NormStats>
where
    I: IntoIterator<Item = &'a WardBrdf>,
{
    let vecs: Vec<ParamVec> = targets.into_iter().map(|b| parameterization.encode(b)).collect();
    if vecs.is_empty() {
        return Err(Error::Empty("no training scenes for normalization statistics".into()));
    }
    let n = vecs.len() as f64;
    let mut mean = [0.0; 5];
    for v in &vecs {
        for k in 0..5 {
            mean[k] += v[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0; 5];
    for v in &vecs {
        for k in 0..5 {
            var[k] += (v[k] - mean[k]).powi(2);
        }
    }
    let std = var.map(|s| (s / n).sqrt());
    if let Some(k) = std.iter().position(|s| !(*s > 1e-12)) {
        return Err(Error::Dataset(format!(
            "training targets have zero spread in dimension '{}'; generate a more varied dataset",
            parameterization.dim_names()[k]
        )));
    }
    Ok(NormStats { parameterization, mean, std })
}

impl NormStats {
    pub fn normalize(&self, v: &ParamVec) -> ParamVec {
        std::array::from_fn(|k| (v[k] - self.mean[k]) / self.std[k])
    }

    pub fn denormalize(&self, z: &ParamVec) -> ParamVec {
        std::array::from_fn(|k| self.mean[k] + self.std[k] * z[k])
    }
}
