//! Dense and 1-D convolutional binary classifiers with hand-written
//! backpropagation, BCE and focal losses, and Adam.

mod loss;
mod model;
mod optim;
mod spec;
mod tensor;
mod train;

use thiserror::Error;

pub use loss::{bce_loss, bce_per_sample, focal_loss, focal_per_sample, log_sigmoid, sigmoid, softplus};
pub use model::{
    dataset_tensor, init_model, predict_proba, ForwardCache, ForwardMode, Gradients, LayerState, ModelState,
    MODEL_FORMAT_VERSION,
};
pub use optim::{adam_step, AdamState};
pub use spec::{
    cnn_flatten_width, LayerSpec, ModelKind, ModelSpec, BATCHNORM_EPSILON, BATCHNORM_MOMENTUM, CNN_MIN_WIDTH,
    DNN_DROPOUT,
};
pub use tensor::Tensor;
pub use train::{train, LossKind, TrainConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// Backward was given a cache from an eval pass or from an older parameter version.
    #[error("forward cache does not belong to the current train-mode state")]
    StaleCache,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("{0}")]
    NonFinite(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model file: {0}")]
    Format(String),
}
