use rand::Rng;

use crate::error::{Error, Result};
use crate::synth::VoxelSample;

/// Indices of `n` representative voxels: farthest-point sampling on normals
/// starting from the voxel with the most observations; when fewer than `n`
/// exist, all are taken and the rest drawn with replacement.
pub fn select_voxels<R: Rng>(samples: &[VoxelSample], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if samples.is_empty() {
        return Err(Error::Empty("no voxel samples to select from".into()));
    }
    if n == 0 {
        return Err(Error::Config("voxel count must be positive".into()));
    }
    let mut first = 0;
    for (i, s) in samples.iter().enumerate() {
        if s.observations.len() > samples[first].observations.len() {
            first = i;
        }
    }
    let take = n.min(samples.len());
    let mut chosen = vec![first];
    // Largest cosine to any chosen normal; farthest point minimises it.
    let mut closeness: Vec<f64> = samples.iter().map(|s| s.normal.dot(samples[first].normal)).collect();
    let mut taken = vec![false; samples.len()];
    taken[first] = true;
    while chosen.len() < take {
        let mut best = usize::MAX;
        for i in 0..samples.len() {
            if !taken[i] && (best == usize::MAX || closeness[i] < closeness[best]) {
                best = i;
            }
        }
        taken[best] = true;
        chosen.push(best);
        let nb = samples[best].normal;
        for (c, s) in closeness.iter_mut().zip(samples) {
            *c = c.max(s.normal.dot(nb));
        }
    }
    while chosen.len() < n {
        chosen.push(rng.gen_range(0..samples.len()));
    }
    Ok(chosen)
}
