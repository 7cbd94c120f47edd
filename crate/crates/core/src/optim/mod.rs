//! Plain SGD training: learning-rate policies, L1/L2 penalties, the
//! training loop and its metrics.

mod penalty;
mod schedule;
mod sgd;
mod train;

pub use penalty::{add_penalty_grad, penalty_grad, regularized_loss};
pub use schedule::{DecayPolicy, PolicyKind};
pub use sgd::sgd_step;
pub use train::{evaluate, total_iterations, train, EpochMetrics, MetricsLog, RunSummary, TrainConfig};
