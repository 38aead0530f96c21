//! Neural best possible Q-learning for discrete actions.
//!
//! Each agent owns a main network `Q_i`, an expectation network `Qe_i` and a
//! soft-updated copy of `Qe_i`. Networks are small ReLU MLPs with
//! hand-written backpropagation, trained with Adam.

mod loss;
mod mlp;
mod optim;
mod task;
mod train;

pub use loss::{
    mse_loss_and_grad, qe_loss_and_grad, qi_weighted_loss_and_grad, td_loss_and_grad, FeatureTransition,
    LossGrad,
};
pub use mlp::{mlp_forward, ForwardCache, MlpQNetwork};
pub use optim::{soft_update, OptimizerState};
pub use task::{DifferentialTask, GreedyFn, MdpTask, NeuralTask};
pub use train::{
    bql_neural_train, iql_neural_train, NeuralBqlAgent, NeuralConfig, NeuralIqlAgent, NeuralRun,
};
