//! Optimizer, training loop, metrics, baselines and experiment sweeps.

mod compare;
mod metrics;
mod optim;
mod perturb;
mod train;

pub use compare::{compare_models, ComparisonRow, ComparisonTable};
pub use metrics::{evaluate, evaluate_slices, fmt_value, MetricsReport};
pub use optim::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use perturb::{perturbation_sweep, PerturbReport, PerturbRow};
pub use train::{
    batch_gradient, evaluate_model, predict_dataset, train, train_on_matrix, EvalRecord,
    SplitDataset, TrainConfig, TrainHistory, TrainOutcome,
};

use crate::model::ha_forward;
use crate::tensor::Tensor;

/// Historical-average baseline for a single `N x n` window.
pub fn baseline_ha(window: &Tensor, horizon: usize) -> Tensor {
    ha_forward(window, horizon)
}
