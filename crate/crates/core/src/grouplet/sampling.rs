use rand::seq::index;
use rand::Rng;

use super::net::OBS_FEATURES;
use crate::error::{Error, Result};
use crate::nn::Real;
use crate::synth::{Observation, VoxelSample};

/// Observations sorted by cosine distance `1 − o·n` to the voxel normal;
/// equal distances keep frame order.
pub fn order_observations(voxel: &VoxelSample) -> Vec<Observation> {
    sort_by_cosine(voxel, voxel.observations.clone())
}

fn sort_by_cosine(voxel: &VoxelSample, mut obs: Vec<Observation>) -> Vec<Observation> {
    let n = voxel.normal;
    obs.sort_by(|a, b| {
        let (da, db) = (1.0 - a.view_dir.dot(n), 1.0 - b.view_dir.dot(n));
        da.total_cmp(&db).then(a.frame_id.cmp(&b.frame_id))
    });
    obs
}

/// `m` observations drawn without replacement when enough exist, otherwise
/// with replacement, returned in cosine order.
pub fn sample_node_inputs<R: Rng>(voxel: &VoxelSample, m: usize, rng: &mut R) -> Result<Vec<Observation>> {
    let all = &voxel.observations;
    if all.is_empty() {
        return Err(Error::Empty("voxel has no observations".into()));
    }
    let drawn: Vec<Observation> = if all.len() >= m {
        index::sample(rng, all.len(), m).into_iter().map(|i| all[i]).collect()
    } else {
        (0..m).map(|_| all[rng.gen_range(0..all.len())]).collect()
    };
    Ok(sort_by_cosine(voxel, drawn))
}

/// `[C, o, F̄, B̄]` for one observation.
pub fn observation_features(o: &Observation) -> [f64; OBS_FEATURES] {
    let mut f = [0.0; OBS_FEATURES];
    f[0..3].copy_from_slice(&o.color);
    f[3..6].copy_from_slice(&o.view_dir.to_array());
    f[6..9].copy_from_slice(&o.f_bar);
    f[9..12].copy_from_slice(&o.b_bar);
    f
}

/// Network input for a batch of predictions: `groups[g]` nodes for
/// prediction `g`, each with `m` observation feature rows and a normal.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeBatch<T> {
    pub m: usize,
    pub observations: Vec<T>,
    pub normals: Vec<T>,
    pub groups: Vec<usize>,
}

impl<T: Real> NodeBatch<T> {
    pub fn new(m: usize) -> Self {
        NodeBatch { m, observations: Vec::new(), normals: Vec::new(), groups: Vec::new() }
    }

    pub fn nodes(&self) -> usize {
        self.normals.len() / 3
    }

    /// Appends one prediction made of `(normal, ordered observations)` nodes.
    pub fn push_group(&mut self, nodes: &[(crate::math::Vec3, Vec<Observation>)]) -> Result<()> {
        if nodes.is_empty() {
            return Err(Error::Empty("a prediction needs at least one node".into()));
        }
        for (normal, obs) in nodes {
            if obs.len() != self.m {
                return Err(Error::ShapeMismatch(format!("node has {} observations, expected {}", obs.len(), self.m)));
            }
            for o in obs {
                self.observations.extend(observation_features(o).map(T::of));
            }
            self.normals.extend(normal.to_array().map(T::of));
        }
        self.groups.push(nodes.len());
        Ok(())
    }
}
