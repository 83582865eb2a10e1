//! Losses, target normalization, model plumbing and the training loop.

pub mod loss;
pub mod model;
pub mod norm;
mod train;

pub use loss::{loss_ec, loss_total, LossConfig, LossValue, Parameterization, DEFAULT_LAMBDA};
pub use model::{Architecture, ModelKind, Network, Precision, PreparedScene, TrainedModel};
pub use norm::{compute_norm_stats, NormStats};
pub use train::{train, TrainConfig, TrainOutcome, DEFAULT_BATCH, DESK_BUDGET};

#[cfg(test)]
mod tests;
