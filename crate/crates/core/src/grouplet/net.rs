use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampling::NodeBatch;
use crate::error::{Error, Result};
use crate::nn::{moment_pool, moment_pool_backward, named, tanh, tanh_backward, Linear, Module, Real, Tensor};

pub const OBS_FEATURES: usize = 12;
pub const BRANCH: [usize; 4] = [OBS_FEATURES, 128, 128, 64];
pub const NODE_HIDDEN: [usize; 2] = [256, 128];
pub const REGRESSOR: [usize; 3] = [128, 128, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupletPreset {
    Fast,
    Slow,
}

impl GroupletPreset {
    pub fn nodes(self) -> usize {
        match self {
            GroupletPreset::Fast => 20,
            GroupletPreset::Slow => 354,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupletConfig {
    /// Nodes (voxels) per prediction at inference.
    pub nodes: usize,
    /// Nodes per prediction during training.
    pub train_nodes: usize,
    /// Observations per node.
    pub observations: usize,
}

impl Default for GroupletConfig {
    fn default() -> Self {
        GroupletConfig::preset(GroupletPreset::Fast)
    }
}

impl GroupletConfig {
    pub fn preset(p: GroupletPreset) -> Self {
        GroupletConfig { nodes: p.nodes(), train_nodes: 20, observations: 10 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 || self.train_nodes == 0 || self.observations == 0 {
            return Err(Error::Config("Grouplet node and observation counts must be positive".into()));
        }
        Ok(())
    }

    /// Width of the concatenated node input, `M·64 + 3`.
    pub fn node_input(&self) -> usize {
        self.observations * BRANCH[3] + 3
    }

    pub fn param_count(&self) -> usize {
        let mlp = |w: &[usize]| w.windows(2).map(|p| p[0] * p[1] + p[1]).sum::<usize>();
        mlp(&BRANCH) + mlp(&[self.node_input(), NODE_HIDDEN[0], NODE_HIDDEN[1]]) + mlp(&[2 * NODE_HIDDEN[1], REGRESSOR[0], REGRESSOR[1], REGRESSOR[2]])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grouplet<T> {
    pub config: GroupletConfig,
    pub branch: [Linear<T>; 3],
    pub node: [Linear<T>; 2],
    pub regressor: [Linear<T>; 3],
}

/// Activations of a tanh MLP: `acts[0]` is the input, `acts[k+1]` the output
/// of layer `k`.
#[derive(Debug, Clone)]
struct MlpTrace<T> {
    acts: Vec<Vec<T>>,
}

fn mlp_forward<T: Real>(layers: &[Linear<T>], x: &[T], linear_last: bool) -> Result<MlpTrace<T>> {
    let mut acts = vec![x.to_vec()];
    for (k, l) in layers.iter().enumerate() {
        let z = l.forward(acts.last().unwrap())?;
        acts.push(if linear_last && k + 1 == layers.len() { z } else { tanh(&z) });
    }
    Ok(MlpTrace { acts })
}

fn mlp_backward<T: Real>(
    layers: &[Linear<T>],
    trace: &MlpTrace<T>,
    dy: &[T],
    grads: &mut [Linear<T>],
    linear_last: bool,
    need_dx: bool,
) -> Result<Option<Vec<T>>> {
    let mut d = dy.to_vec();
    for k in (0..layers.len()).rev() {
        if !(linear_last && k + 1 == layers.len()) {
            d = tanh_backward(&trace.acts[k + 1], &d);
        }
        let want = need_dx || k > 0;
        match layers[k].backward(&trace.acts[k], &d, &mut grads[k], want)? {
            Some(dx) => d = dx,
            None => return Ok(None),
        }
    }
    Ok(Some(d))
}

#[derive(Debug, Clone)]
pub struct GroupletCache<T> {
    groups: Vec<usize>,
    branch: MlpTrace<T>,
    node: MlpTrace<T>,
    pooled: Vec<T>,
    regressor: MlpTrace<T>,
}

impl<T: Real> Grouplet<T> {
    pub fn new<R: Rng>(config: GroupletConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let lin = |a: usize, b: usize, rng: &mut R| Linear::new(a, b, rng);
        Ok(Grouplet {
            config,
            branch: [lin(BRANCH[0], BRANCH[1], rng), lin(BRANCH[1], BRANCH[2], rng), lin(BRANCH[2], BRANCH[3], rng)],
            node: [lin(config.node_input(), NODE_HIDDEN[0], rng), lin(NODE_HIDDEN[0], NODE_HIDDEN[1], rng)],
            regressor: [
                lin(2 * NODE_HIDDEN[1], REGRESSOR[0], rng),
                lin(REGRESSOR[0], REGRESSOR[1], rng),
                lin(REGRESSOR[1], REGRESSOR[2], rng),
            ],
        })
    }

    fn check(&self, batch: &NodeBatch<T>) -> Result<usize> {
        let m = self.config.observations;
        if batch.m != m {
            return Err(Error::ShapeMismatch(format!("batch has {} observations per node, network expects {m}", batch.m)));
        }
        let nodes = batch.nodes();
        if batch.groups.is_empty() || batch.groups.contains(&0) {
            return Err(Error::Empty("every prediction needs at least one node".into()));
        }
        if batch.groups.iter().sum::<usize>() != nodes
            || batch.normals.len() != nodes * 3
            || batch.observations.len() != nodes * m * OBS_FEATURES
        {
            return Err(Error::ShapeMismatch("inconsistent node batch".into()));
        }
        Ok(nodes)
    }

    /// Per-node 128-vectors for the nodes of `batch`.
    fn nodes_forward(&self, batch: &NodeBatch<T>) -> Result<(MlpTrace<T>, MlpTrace<T>)> {
        let nodes = self.check(batch)?;
        let branch = mlp_forward(&self.branch, &batch.observations, false)?;
        let emb = branch.acts.last().unwrap();
        let per = self.config.observations * BRANCH[3];
        let width = self.config.node_input();
        let mut input = Vec::with_capacity(nodes * width);
        for k in 0..nodes {
            input.extend_from_slice(&emb[k * per..(k + 1) * per]);
            input.extend_from_slice(&batch.normals[k * 3..k * 3 + 3]);
        }
        let node = mlp_forward(&self.node, &input, false)?;
        Ok((branch, node))
    }

    /// Node representations only (one 128-vector per node).
    pub fn node_forward(&self, batch: &NodeBatch<T>) -> Result<Vec<T>> {
        Ok(self.nodes_forward(batch)?.1.acts.pop().unwrap())
    }

    pub fn forward(&self, batch: &NodeBatch<T>) -> Result<(Vec<T>, GroupletCache<T>)> {
        let (branch, node) = self.nodes_forward(batch)?;
        let pooled = moment_pool(node.acts.last().unwrap(), NODE_HIDDEN[1], &batch.groups)?;
        let regressor = mlp_forward(&self.regressor, &pooled, true)?;
        let y = regressor.acts.last().unwrap().clone();
        Ok((y, GroupletCache { groups: batch.groups.clone(), branch, node, pooled, regressor }))
    }

    pub fn predict(&self, batch: &NodeBatch<T>) -> Result<Vec<T>> {
        Ok(self.forward(batch)?.0)
    }

    /// Pooled 256-vectors, `[mean, variance]` per prediction.
    pub fn pooled(&self, batch: &NodeBatch<T>) -> Result<Vec<T>> {
        Ok(self.forward(batch)?.1.pooled)
    }

    pub fn backward(&self, cache: &GroupletCache<T>, dy: &[T], grad: &mut Grouplet<T>) -> Result<()> {
        let dpooled = mlp_backward(&self.regressor, &cache.regressor, dy, &mut grad.regressor, true, true)?.unwrap();
        let node_out = cache.node.acts.last().unwrap();
        let dnode = moment_pool_backward(node_out, NODE_HIDDEN[1], &cache.groups, &cache.pooled, &dpooled);
        let dinput = mlp_backward(&self.node, &cache.node, &dnode, &mut grad.node, false, true)?.unwrap();
        let per = self.config.observations * BRANCH[3];
        let width = self.config.node_input();
        let demb: Vec<T> = dinput.chunks_exact(width).flat_map(|row| row[..per].iter().copied()).collect();
        mlp_backward(&self.branch, &cache.branch, &demb, &mut grad.branch, false, false)?;
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Grouplet<U> {
        let c = |l: &Linear<T>| Linear { w: l.w.cast::<U>(), b: l.b.cast::<U>() };
        Grouplet {
            config: self.config,
            branch: [c(&self.branch[0]), c(&self.branch[1]), c(&self.branch[2])],
            node: [c(&self.node[0]), c(&self.node[1])],
            regressor: [c(&self.regressor[0]), c(&self.regressor[1]), c(&self.regressor[2])],
        }
    }
}

impl<T: Real> Module<T> for Grouplet<T> {
    fn tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = Vec::new();
        for (k, l) in self.branch.iter().enumerate() {
            v.extend(named(&format!("branch{k}"), l));
        }
        for (k, l) in self.node.iter().enumerate() {
            v.extend(named(&format!("node{k}"), l));
        }
        for (k, l) in self.regressor.iter().enumerate() {
            v.extend(named(&format!("regressor{k}"), l));
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = Vec::new();
        for l in self.branch.iter_mut().chain(self.node.iter_mut()).chain(self.regressor.iter_mut()) {
            v.extend(l.tensors_mut());
        }
        v
    }
}
