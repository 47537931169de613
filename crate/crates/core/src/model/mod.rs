//! Compound-scaled CNN with a GAP -> dropout -> dense head.

mod cnn;
mod dump;
mod scaling;
mod sidecar;
mod train;

pub use cnn::{build_model, CnnModel, Forward, Layer, Prediction, DROPOUT_RATE, NUM_CLASSES};
pub use dump::{activation_grid, dump_layer_activations};
pub use scaling::{plan_scaling, ScalingConfig, ScalingPlan};
pub use sidecar::{read_plan_sidecar, sidecar_path, write_plan_sidecar, PlanSidecar};
pub use train::{evaluate, train, Classifier, LossObjective, TrainOptions, TrainReport};
