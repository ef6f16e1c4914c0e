//! Two-stage training, optimizer, schedule and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod optim;
pub mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION};
pub use config::{lr_at, Sampling, TrainConfig};
pub use optim::Adam;
pub use trainer::{train_stage1, train_stage2, StepReport, Trainer};
