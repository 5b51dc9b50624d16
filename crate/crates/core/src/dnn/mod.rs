//! Unsupervised power-control network.
//!
//! The network maps the (normalized) large-scale fading of all AP-user
//! pairs to one power coefficient per user. It is trained without labels:
//! the loss is the negative minimum user rate, differentiated through the
//! rate expression and back through the layers.

mod activation;
mod adam;
mod loss;
mod model;
mod train;

pub use activation::{elu, elu_derivative, sigmoid, sigmoid_derivative, Activation};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{batch_loss, loss_and_gradients, min_rate_gradient, stack_raw, TrainingSample};
pub use model::{DenseLayer, Gradients, Mlp, Normalizer, STD_FLOOR};
pub use train::{
    online_finetune, train, train_from, FinetuneOutcome, HistoryRecord, TrainOutcome,
    TrainingHistory,
};
