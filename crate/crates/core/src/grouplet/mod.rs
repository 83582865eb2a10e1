//! Sampling-based set regressor: per-observation branches, per-voxel nodes
//! with shared weights, moment pooling across nodes and a final regressor.

pub mod net;
pub mod sampling;

pub use net::{Grouplet, GroupletCache, GroupletConfig, GroupletPreset, OBS_FEATURES};
pub use sampling::{observation_features, order_observations, sample_node_inputs, NodeBatch};
