//! The shallow pReLU network, its gradients, initialization and training.

mod checkpoint;
mod init;
mod loss;
mod prelu;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use init::{init_balanced, init_kaiming, DirectionLaw, InitSpec};
pub use loss::{loss_derivative, loss_value, softmax_cross_entropy, LossKind};
pub use prelu::{hidden_features, relu_pow, relu_pow_deriv, stable_rank, Gradient, PreluNet};
pub use train::{
    accuracy, finite_difference_gradient, objective, objective_gradient, train, History, HistoryRow, Monitor,
    Optimizer, Reduction, Snapshot, TrainConfig, TrainHook,
};
