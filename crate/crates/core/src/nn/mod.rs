//! Reverse-mode network kit and the reward-prediction architectures.

pub mod graph;
pub mod models;
pub mod params;
pub mod train;

pub use graph::{Activation, Gradients, Graph, Tensor, Var};
pub use models::{
    attention_loss, attention_slot_distances, bootstrap_history, mix_thetas, slot_sources,
    upsample_attention, Architecture, HistorySlot, NetDims, PolicyInput, PolicyNet, PolicyOutput,
    Tan, TanDims, TanOutput,
};
pub use params::{Init, Params};
pub use train::{
    policy_net_gradient, predict, tan_gradient, tan_samples, train_policy_net, train_tan, NnConfig,
    NnEpochMetrics, Optimizer, OptimizerState, PolicyNetRun, TanConfig, TanRun, TanSample,
    TanSamples,
};
