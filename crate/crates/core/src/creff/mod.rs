//! Classifier re-training on federated features: per-class real feature
//! gradients, gradient matching on the server and the dual-model loop.

mod bank;
mod gradients;
mod optimize;
mod retrain;
mod round;

pub use crate::numeric::matching_loss;
pub use bank::FederatedFeatureBank;
pub use gradients::{
    aggregate_class_gradients, client_class_gradients, federated_feature_gradient, ClassGradient,
    ClassGradientUpload, ClientUpload,
};
pub use optimize::{optimize_federated_features, MatchTrace};
pub use retrain::retrain_classifier;
pub use round::{
    client_round, creff_round, initial_bank, run_creff, server_round, CreffConfig,
    CreffRoundOutcome, CreffRun, CreffState, DualModel, RetrainInit,
};
