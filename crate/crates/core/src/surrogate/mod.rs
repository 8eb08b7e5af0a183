//! Neural edge model trained on simulator interactions and queried as an interpolator.
//!
//! The network maps prior features of a neighbour (relative position and, for
//! boids, relative velocity) to the message it sends. Messages are summed for
//! shape formation and averaged for boids.

mod mlp;
mod model;
mod sample;
mod train;

pub use mlp::{adam_step, AdamState, ForwardCache, Gradients, Mlp};
pub use model::{aggregate_node, write_loss_trace, Aggregation, EdgeModel, TargetTransform};
pub use sample::{sample_ground_truth, sample_surrogate, SampleConfig};
pub use train::{train_edge_model, train_node_model, EpochLoss, TrainConfig, TrainReport};
