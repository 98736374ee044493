//! From-scratch networks, losses, optimizer, synthetic tasks, training.

pub mod loss;
pub mod nn;
pub mod optim;
pub mod tasks;
pub mod train;

pub use loss::LossKind;
pub use nn::{Gradients, MlpModel, Workspace};
pub use optim::AdamW;
pub use tasks::Dataset;
pub use train::{adversarial_example, empirical_risk, train, zero_one_risk, TrainConfig};
