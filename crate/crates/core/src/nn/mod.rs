//! Small differentiable compute core: dense and convolutional layers,
//! activations, set pooling, optimizers, gradient checking and checkpoints.
//! Every layer has an explicit forward and backward; there is no graph.

pub mod activation;
pub mod checkpoint;
pub mod conv;
pub mod gradcheck;
pub mod linear;
pub mod ops;
pub mod optim;
pub mod pool;
pub mod tensor;

pub use activation::{relu, relu_backward, tanh, tanh_backward};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, RawCheckpoint, TensorInfo};
pub use conv::{Conv3x3, ImageShape};
pub use gradcheck::grad_check;
pub use linear::{glorot, named, Linear};
pub use optim::{rmsprop_step, sgd_momentum_step, Optimizer, OptimizerConfig};
pub use pool::{maxpool2x2, moment_pool, moment_pool_backward, scatter_backward, setmax, MaxPool};
pub use tensor::{Module, Real, Tensor};

#[cfg(test)]
mod tests;
