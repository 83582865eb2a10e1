use serde::{Deserialize, Serialize};

use super::tensor::{Module, Real};
use crate::error::{Error, Result};

pub const RMSPROP_BETA: f64 = 0.9;
pub const RMSPROP_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Rmsprop { lr: f64, beta: f64, eps: f64 },
    Sgd { lr: f64, momentum: f64 },
}

impl OptimizerConfig {
    pub fn rmsprop(lr: f64) -> Self {
        OptimizerConfig::Rmsprop { lr, beta: RMSPROP_BETA, eps: RMSPROP_EPS }
    }

    pub fn sgd(lr: f64, momentum: f64) -> Self {
        OptimizerConfig::Sgd { lr, momentum }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerConfig::Rmsprop { lr, .. } | OptimizerConfig::Sgd { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerConfig::Rmsprop { lr, beta, eps } => lr > 0.0 && (0.0..1.0).contains(&beta) && eps > 0.0,
            OptimizerConfig::Sgd { lr, momentum } => lr > 0.0 && (0.0..1.0).contains(&momentum),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// `s ← βs + (1−β)g²; p ← p − lr·g/(√s + ε)`.
pub fn rmsprop_step<T: Real>(params: &mut [T], grads: &[T], state: &mut [T], lr: f64, beta: f64, eps: f64) {
    let (lr, beta, eps) = (T::of(lr), T::of(beta), T::of(eps));
    let one = T::one();
    for ((p, &g), s) in params.iter_mut().zip(grads).zip(state.iter_mut()) {
        *s = beta * *s + (one - beta) * g * g;
        *p -= lr * g / (s.sqrt() + eps);
    }
}

/// `v ← momentum·v − lr·g; p ← p + v`.
pub fn sgd_momentum_step<T: Real>(params: &mut [T], grads: &[T], velocity: &mut [T], lr: f64, momentum: f64) {
    let (lr, momentum) = (T::of(lr), T::of(momentum));
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
}

/// Optimizer with one accumulator per parameter tensor.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    pub config: OptimizerConfig,
    state: Vec<Vec<T>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(config: OptimizerConfig) -> Self {
        Optimizer { config, state: Vec::new() }
    }

    pub fn state(&self) -> &[Vec<T>] {
        &self.state
    }

    /// One update. Refuses (leaving parameters untouched) when any gradient is
    /// not finite.
    pub fn step<M: Module<T>>(&mut self, params: &mut M, grads: &M) -> Result<()> {
        let gs = grads.tensors();
        for (name, g) in &gs {
            if let Some(i) = g.data.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {name} at index {i} is {:?}", g.data[i])));
            }
        }
        let ps = params.tensors_mut();
        if self.state.is_empty() {
            self.state = ps.iter().map(|p| vec![T::zero(); p.len()]).collect();
        }
        if self.state.len() != ps.len() {
            return Err(Error::ShapeMismatch("optimizer state does not match the parameters".into()));
        }
        for ((p, (_, g)), s) in ps.into_iter().zip(&gs).zip(self.state.iter_mut()) {
            if p.len() != g.len() || p.len() != s.len() {
                return Err(Error::ShapeMismatch("gradient shape differs from parameter".into()));
            }
            match self.config {
                OptimizerConfig::Rmsprop { lr, beta, eps } => rmsprop_step(&mut p.data, &g.data, s, lr, beta, eps),
                OptimizerConfig::Sgd { lr, momentum } => sgd_momentum_step(&mut p.data, &g.data, s, lr, momentum),
            }
        }
        Ok(())
    }
}
