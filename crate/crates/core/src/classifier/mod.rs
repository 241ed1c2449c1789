//! Depth-2 gradient-boosted trees and the adaptive Bayes threshold.

mod boost;
mod threshold;

pub use boost::{
    logistic_loss, predict_proba, train_boosted, BoostedModel, Node, TrainConfig, Tree, MAX_DEPTH,
};
pub use threshold::{fit_adaptive_threshold, ScoreDistributionFit};
