//! Dense linear algebra, the extractor/classifier model, softmax
//! cross-entropy and the hand-derived gradients built on them.

mod loss;
mod matching;
mod matrix;
mod model;

pub use loss::{classifier_grad, classifier_logits, softmax_ce, softmax_rows};
pub use matching::{
    matching_grad_wrt_features, matching_loss, matching_loss_and_grad, matching_loss_grad,
};
pub(crate) use matching::row_dissimilarity;
pub use matrix::{dot, norm, Matrix};
pub use model::{
    init_classifier, Activation, Extractor, Gradients, Layer, LayerGrad, ModelDims, ModelParams,
};
