//! Fairness-regularized graph neural network for career classification.

mod features;
mod loss;
mod model;
mod train;

use thiserror::Error;

pub use features::{aggregate_user_features, build_features, hash_tokens, token_slot, Adjacency, FeatureMatrix, FEATURE_DIM};
pub use loss::{
    acc_with_grad, dp_differences, dp_with_grad, eo_differences, eo_with_grad, loss_acc, loss_dp, loss_eo, objective_with_grad,
    FairLossConfig, PROB_FLOOR,
};
pub use model::{mean_aggregate, softmax_backward, softmax_rows, Activation, Forward, GnnGradients, GnnInput, GnnModel};
pub use train::{loss_and_grad, train_gnn, GnnTrainConfig, LabeledNodes, TrainedGnn};

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("a protected group has no members in the scored set")]
    EmptyGroup,
    #[error("training and validation sets share node {0}")]
    Overlap(usize),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),
    #[error("loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize, checkpoint: Box<GnnModel> },
}

/// The GNN for `g` on the given node subset, with career-class logits.
pub fn gnn_forward(model: &GnnModel, input: &GnnInput, nodes: &[usize]) -> ndarray::Array2<f64> {
    model.predict(input, nodes)
}
