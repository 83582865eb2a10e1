use std::cell::RefCell;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::loss::{loss_total, LossConfig};
use super::model::{
    build_batch, choose_voxels, Architecture, ModelKind, ModelMeta, Network, Precision, PreparedScene, Sampling,
    TrainedModel, CHECKPOINT_FORMAT,
};
use super::norm::{compute_norm_stats, NormStats};
use crate::error::{Error, Result};
use crate::eval::{evaluate, prepare_scenes, Predictor};
use crate::nn::{Module, Optimizer, OptimizerConfig, Real};
use crate::synth::dataset::derive_seed;
use crate::synth::{Dataset, Split};

pub const DESK_BUDGET: usize = 2000;
pub const DEFAULT_BATCH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelKind,
    /// Overrides the preset architecture for `model`.
    pub architecture: Option<Architecture>,
    /// Overrides the model's default optimizer.
    pub optimizer: Option<OptimizerConfig>,
    pub minibatches: usize,
    /// Scenes per minibatch.
    pub batch_size: usize,
    pub seed: u64,
    pub precision: Precision,
    /// Validation every this many minibatches (and after the last one).
    pub eval_every: usize,
    pub eval_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelKind::GroupletFast,
            architecture: None,
            optimizer: None,
            minibatches: DESK_BUDGET,
            batch_size: DEFAULT_BATCH,
            seed: 0,
            precision: Precision::F32,
            eval_every: 250,
            eval_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn new(model: ModelKind) -> Self {
        TrainConfig { model, ..Default::default() }
    }

    /// Full-scale budget: 100K minibatches for HemiCNN, 13K for Grouplet.
    pub fn full_budget(model: ModelKind) -> usize {
        match model {
            ModelKind::HemiCnn => 100_000,
            ModelKind::GroupletFast | ModelKind::GroupletSlow => 13_000,
        }
    }

    pub fn default_optimizer(model: ModelKind) -> OptimizerConfig {
        match model {
            ModelKind::HemiCnn => OptimizerConfig::rmsprop(1e-4),
            ModelKind::GroupletFast | ModelKind::GroupletSlow => OptimizerConfig::sgd(0.01, 0.9),
        }
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture.unwrap_or_else(|| Architecture::default_for(self.model))
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        self.optimizer.unwrap_or_else(|| Self::default_optimizer(self.model))
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        match (self.model, self.architecture()) {
            (ModelKind::HemiCnn, Architecture::HemiCnn(c)) => c.validate()?,
            (ModelKind::GroupletFast | ModelKind::GroupletSlow, Architecture::Grouplet(c)) => c.validate()?,
            (m, _) => return Err(Error::Config(format!("architecture does not match model {m}"))),
        }
        self.optimizer().validate()
    }
}

/// Images or nodes per prediction while training.
fn train_size(arch: &Architecture) -> usize {
    match arch {
        Architecture::HemiCnn(c) => c.voxels,
        Architecture::Grouplet(c) => c.train_nodes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub final_checkpoint: PathBuf,
    pub best_checkpoint: PathBuf,
    pub log: PathBuf,
    pub steps: usize,
    pub param_count: usize,
    pub final_val_rmse: f64,
    pub best_val_rmse: f64,
    pub best_step: usize,
}

/// Trains one network on the dataset's train split, validating on its
/// validation split. Writes `final.ckpt`, `best.ckpt` and `train.jsonl`
/// under `out_dir`.
pub fn train(dataset: &Dataset, cfg: &TrainConfig, loss: &LossConfig, out_dir: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    loss.validate()?;
    let arch = cfg.architecture();
    let train_scenes = prepare_scenes(dataset, Split::Train, Some(&arch))?;
    let val_scenes = prepare_scenes(dataset, Split::Validation, Some(&arch))?;
    if train_scenes.is_empty() || val_scenes.is_empty() {
        return Err(Error::Dataset("training needs non-empty train and validation splits".into()));
    }
    let norm = compute_norm_stats(train_scenes.iter().map(|s| s.target()), loss.parameterization)?;
    std::fs::create_dir_all(out_dir)?;
    match cfg.precision {
        Precision::F32 => train_impl::<f32>(cfg, loss, &arch, norm, &train_scenes, &val_scenes, out_dir),
        Precision::F64 => train_impl::<f64>(cfg, loss, &arch, norm, &train_scenes, &val_scenes, out_dir),
    }
}

struct Run<'a> {
    cfg: &'a TrainConfig,
    loss: &'a LossConfig,
    arch: Architecture,
    norm: NormStats,
}

impl Run<'_> {
    fn model<T: Real>(&self, network: &Network<T>, step: usize) -> Result<TrainedModel<T>> {
        Ok(TrainedModel {
            meta: ModelMeta {
                format: CHECKPOINT_FORMAT.into(),
                model: self.cfg.model,
                architecture: self.arch,
                loss: *self.loss,
                norm: self.norm,
                precision: self.cfg.precision,
                step,
                param_count: network.num_params(),
                train: Some(json!({
                    "optimizer": self.cfg.optimizer(),
                    "minibatches": self.cfg.minibatches,
                    "batch_size": self.cfg.batch_size,
                    "seed": self.cfg.seed,
                    "train_size": train_size(&self.arch),
                })),
            },
            network: network.clone(),
        })
    }

    fn validate<T: Real>(&self, network: &Network<T>, step: usize, val: &[PreparedScene]) -> Result<f64> {
        let m = self.model(&network.cast::<f64>(), step)?;
        Ok(evaluate(Predictor::Model(&m), val, self.cfg.eval_seed)?.rmse)
    }
}

fn train_impl<T: Real>(
    cfg: &TrainConfig,
    loss: &LossConfig,
    arch: &Architecture,
    norm: NormStats,
    train_scenes: &[PreparedScene],
    val_scenes: &[PreparedScene],
    out_dir: &Path,
) -> Result<TrainOutcome> {
    let run = Run { cfg, loss, arch: *arch, norm };
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0));
    let mut network = Network::<T>::new(arch, &mut init_rng)?;
    let stream = RefCell::new(ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1)));
    let mut optimizer = Optimizer::<T>::new(cfg.optimizer());
    let quadrature = loss.quadrature();
    let size = train_size(arch);

    let log_path = out_dir.join("train.jsonl");
    let best_path = out_dir.join("best.ckpt");
    let final_path = out_dir.join("final.ckpt");
    let mut log = BufWriter::new(File::create(&log_path)?);
    writeln!(
        log,
        "{}",
        json!({
            "event": "start",
            "model": cfg.model,
            "architecture": arch,
            "loss": loss,
            "optimizer": cfg.optimizer(),
            "minibatches": cfg.minibatches,
            "batch_size": cfg.batch_size,
            "train_size": size,
            "seed": cfg.seed,
            "precision": cfg.precision,
            "param_count": network.num_params(),
            "train_scenes": train_scenes.len(),
            "validation_scenes": val_scenes.len(),
            "norm": norm,
        })
    )?;

    let mut best = run.validate(&network, 0, val_scenes)?;
    let mut best_step = 0;
    run.model(&network, 0)?.save(&best_path)?;
    writeln!(log, "{}", json!({"event": "validation", "step": 0, "val_rmse": best}))?;
    let mut last_val = best;

    for step in 1..=cfg.minibatches {
        let picks = choose_voxels(train_scenes.len(), cfg.batch_size, &mut *stream.borrow_mut());
        let scenes: Vec<&PreparedScene> = picks.iter().map(|&i| &train_scenes[i]).collect();
        let (input, views) = build_batch::<T>(arch, &scenes, size, Sampling::Stream(&stream))?;
        let (y, cache) = network.forward(&input)?;
        let b = scenes.len();
        let mut dy = vec![T::zero(); y.len()];
        let (mut total, mut e_d, mut e_c, mut clamped) = (0.0, 0.0, 0.0, 0usize);
        let mut preds = Vec::with_capacity(b);
        for (i, s) in scenes.iter().enumerate() {
            let z: [f64; 5] = std::array::from_fn(|k| y[i * 5 + k].f64());
            let pred = norm.denormalize(&z);
            preds.push(pred);
            let v = loss_total(&pred, s.target(), &views[i], loss, quadrature.as_ref())?;
            total += v.total;
            e_d += v.e_d;
            e_c += v.e_c;
            clamped += v.clamped as usize;
            for k in 0..5 {
                dy[i * 5 + k] = T::of(norm.std[k] * v.grad[k] / b as f64);
            }
        }
        let n = b as f64;
        let (total, e_d, e_c) = (total / n, e_d / n, e_c / n);
        let finite_dy = dy.iter().all(|v| v.is_finite());
        if !total.is_finite() || !finite_dy {
            let dump = out_dir.join(format!("nonfinite_step_{step}.json"));
            let body = json!({
                "step": step,
                "scenes": scenes.iter().map(|s| &s.id).collect::<Vec<_>>(),
                "predictions": preds,
                "targets": scenes.iter().map(|s| loss.parameterization.encode(s.target())).collect::<Vec<_>>(),
                "loss": total.to_string(),
            });
            std::fs::write(&dump, serde_json::to_vec_pretty(&body)?)?;
            return Err(Error::NonFinite(format!("loss at minibatch {step} is not finite; inputs dumped to {}", dump.display())));
        }
        let mut grad = network.zeros_like();
        network.backward(&cache, &dy, &mut grad)?;
        optimizer.step(&mut network, &grad)?;
        writeln!(log, "{}", json!({"event": "step", "step": step, "loss": total, "e_d": e_d, "e_c": e_c, "clamped": clamped}))?;

        if step % cfg.eval_every == 0 || step == cfg.minibatches {
            let v = run.validate(&network, step, val_scenes)?;
            writeln!(log, "{}", json!({"event": "validation", "step": step, "val_rmse": v}))?;
            last_val = v;
            if v < best {
                best = v;
                best_step = step;
                run.model(&network, step)?.save(&best_path)?;
            }
        }
    }
    run.model(&network, cfg.minibatches)?.save(&final_path)?;
    writeln!(log, "{}", json!({"event": "end", "steps": cfg.minibatches, "final_val_rmse": last_val, "best_val_rmse": best, "best_step": best_step}))?;
    log.flush()?;
    Ok(TrainOutcome {
        final_checkpoint: final_path,
        best_checkpoint: best_path,
        log: log_path,
        steps: cfg.minibatches,
        param_count: network.num_params(),
        final_val_rmse: last_val,
        best_val_rmse: best,
        best_step,
    })
}
